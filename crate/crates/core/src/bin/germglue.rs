fn main() {
    std::process::exit(germglue::cli::main_with_args(std::env::args_os()));
}
