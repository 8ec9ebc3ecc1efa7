fn main() {
    std::process::exit(laughlin_cli::run(std::env::args_os()));
}
