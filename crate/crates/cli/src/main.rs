fn main() {
    std::process::exit(foresight_cli::run(std::env::args_os()));
}
