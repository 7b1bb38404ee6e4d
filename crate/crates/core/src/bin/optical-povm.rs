fn main() {
    std::process::exit(optical_povm::cli::main_with_args(std::env::args_os()));
}
