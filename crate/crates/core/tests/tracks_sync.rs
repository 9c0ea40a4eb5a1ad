use std::path::Path;

use narrowspace::world::catalog;
use narrowspace::TrackWorld;

fn tracks_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../tracks")
}

#[test]
fn bundled_track_files_match_the_catalog() {
    for world in catalog::all().unwrap() {
        let path = tracks_dir().join(format!("{}.json", world.name));
        let on_disk = TrackWorld::load(&path)
            .unwrap_or_else(|e| panic!("{}: {e} (regenerate with the gen_tracks example)", path.display()));
        assert_eq!(on_disk, world, "{} is stale; regenerate with the gen_tracks example", path.display());
    }
}

#[test]
fn no_stray_track_files() {
    for entry in std::fs::read_dir(tracks_dir()).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        let stem = name.strip_suffix(".json").expect("only .json files in tracks/");
        assert!(catalog::NAMES.contains(&stem), "{name} is not a catalog track");
    }
}
