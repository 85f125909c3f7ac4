fn main() {
    std::process::exit(avalanche_lab::run(std::env::args_os()));
}
