fn main() {
    std::process::exit(geodesy::dispatch(std::env::args_os()));
}
