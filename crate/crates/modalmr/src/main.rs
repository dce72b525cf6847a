fn main() {
    std::process::exit(modalmr::cli::main_with_args(std::env::args_os().collect()));
}
