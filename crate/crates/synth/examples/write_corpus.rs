fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixtures/scenes".into());
    for p in mf_synth::corpus::write_corpus(std::path::Path::new(&dir)).unwrap() {
        println!("{}", p.display());
    }
}
