fn main() {
    std::process::exit(pmest::run_cli());
}
