fn main() {
    std::process::exit(koopbound::cli::main_with_args(std::env::args_os()));
}
