use otinfer_core::data::{ingest_migration_csv, Selection};

use crate::args::{IngestArgs, SelectionArg};
use crate::error::CliError;
use crate::manifest::ManifestBuilder;

pub fn run(args: IngestArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("ingest");
    manifest.input(&args.csv)?;

    let selection = match args.selection {
        SelectionArg::Receiving => Selection::Receiving,
        SelectionArg::Sending => Selection::Sending,
    };
    let record = ingest_migration_csv(&args.csv, &selection)?;

    let dir = args.out.resolve_dir();
    std::fs::create_dir_all(&dir)?;
    let name = args.out.name.as_deref().unwrap_or("ingest");
    let obs_path = dir.join(format!("{name}.observation.json"));
    record.save(&obs_path)?;

    let manifest_path = dir.join(format!("{name}.ingest.manifest.json"));
    manifest
        .config(serde_json::json!({
            "selection": format!("{:?}", args.selection),
            "n": record.n,
        }))
        .output(&obs_path)
        .write(&manifest_path)?;

    println!("wrote {}", obs_path.display());
    println!("wrote {}", manifest_path.display());
    Ok(())
}
