fn main() {
    std::process::exit(flock::cli::main_with_args(std::env::args_os()));
}
