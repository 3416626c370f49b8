fn main() {
    std::process::exit(meshplan_cli::run(std::env::args_os()));
}
