fn main() {
    std::process::exit(mrproj::cli::main_with_args(std::env::args_os()));
}
