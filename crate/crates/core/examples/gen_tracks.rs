//! Regenerates the bundled track files: `cargo run -p narrowspace --example gen_tracks [DIR]`.

use std::path::PathBuf;

fn main() -> narrowspace::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../tracks"));
    std::fs::create_dir_all(&dir).map_err(|e| narrowspace::Error::io(&dir, e))?;
    for world in narrowspace::world::catalog::all()? {
        let path = dir.join(format!("{}.json", world.name));
        world.save(&path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
