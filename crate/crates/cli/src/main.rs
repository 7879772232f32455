fn main() {
    std::process::exit(hinf_cli::run(std::env::args_os()));
}
