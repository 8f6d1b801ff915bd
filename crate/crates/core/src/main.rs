fn main() {
    std::process::exit(untrained_prior::cli::main_with_args(std::env::args_os()));
}
