fn main() {
    std::process::exit(pinball_cli::run(std::env::args_os()));
}
