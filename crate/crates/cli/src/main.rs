fn main() {
    std::process::exit(srelab_cli::run(std::env::args_os()));
}
