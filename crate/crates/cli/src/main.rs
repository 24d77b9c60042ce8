fn main() {
    std::process::exit(solgap_cli::run(std::env::args_os()));
}
