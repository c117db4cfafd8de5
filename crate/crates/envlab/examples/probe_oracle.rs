use envlab::oracle_demos;

fn main() {
    for env in ["pointmass", "blockpush", "pushl"] {
        let t0 = std::time::Instant::now();
        match oracle_demos(env, 50, 12345) {
            Ok(ds) => {
                let discards: usize = ds.episodes.last()
                    .and_then(|e| e.metadata.get("discarded_so_far"))
                    .and_then(|s| s.parse().ok()).unwrap_or(0);
                let mean_len: f64 = ds.episodes.iter().map(|e| e.t_len as f64).sum::<f64>() / ds.episodes.len() as f64;
                println!("{env}: 50 demos ok, {} discards, mean length {:.1}, {:?}", discards, mean_len, t0.elapsed());
            }
            Err(e) => println!("{env}: FAILED: {e}"),
        }
    }
}
