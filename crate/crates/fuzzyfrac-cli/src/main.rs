fn main() {
    std::process::exit(fuzzyfrac_cli::run(std::env::args_os()));
}
