fn main() {
    if let Some(threads) = std::env::var("ABSORBKIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    std::process::exit(absorbkit::cli::main_with_args(std::env::args_os()));
}
