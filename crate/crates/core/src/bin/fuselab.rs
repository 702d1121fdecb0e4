fn main() {
    std::process::exit(fuselab::cli::run(std::env::args_os()));
}
