//! Count the shipped spec's outlines and write them to a pool file.
//!
//!     cargo run --release --example enumerate_outlines -- [pool-path]

use std::path::PathBuf;
use std::time::Instant;

use fable::engine::{read_pool_file, spec_fingerprint, write_pool_file, Limits};
use fable::{check_outline, default_spec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("default.pool"));
    let spec = default_spec();
    println!("{spec}");

    let start = Instant::now();
    let summary = write_pool_file(&spec, &path, Limits::default())?;
    println!(
        "{} outlines -> {} in {:.2?}",
        summary.count,
        path.display(),
        start.elapsed()
    );
    println!("fingerprint {}", spec_fingerprint(&spec));

    let pool = read_pool_file(&path)?;
    for i in [0, pool.count() / 2, pool.count() - 1] {
        let o = pool.get(i).unwrap();
        assert!(check_outline(&spec, &o)?.is_empty());
        println!("#{i:>6} {o}");
    }
    Ok(())
}
