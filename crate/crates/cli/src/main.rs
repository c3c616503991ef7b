fn main() {
    std::process::exit(advbound_cli::run(std::env::args_os()));
}
