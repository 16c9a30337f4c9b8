fn main() {
    std::process::exit(exact_cli::run(std::env::args_os()));
}
