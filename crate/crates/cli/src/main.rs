fn main() {
    std::process::exit(stitchvox_cli::run(std::env::args_os()));
}
