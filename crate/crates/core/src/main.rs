fn main() {
    std::process::exit(hamdelay::cli::main_with_args(std::env::args_os()));
}
