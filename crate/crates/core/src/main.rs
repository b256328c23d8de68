fn main() {
    std::process::exit(veinpulse::cli::run(std::env::args_os()));
}
