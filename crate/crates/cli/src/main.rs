fn main() {
    std::process::exit(qmimo_cli::run(std::env::args_os()));
}
