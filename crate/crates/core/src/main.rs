fn main() {
    std::process::exit(bsfem::app::cli::run_main());
}
