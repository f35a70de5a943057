fn main() {
    std::process::exit(vsharp_cli::run(std::env::args_os()));
}
