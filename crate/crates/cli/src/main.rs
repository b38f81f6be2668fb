fn main() {
    std::process::exit(mirror_cli::run(std::env::args_os().collect()));
}
