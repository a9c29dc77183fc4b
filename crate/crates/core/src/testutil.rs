use std::path::PathBuf;

use crate::da::Ontology;

pub fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config")
}

pub fn shipped_ontology() -> Ontology {
    let dir = config_dir();
    Ontology::load_layered(&[dir.join("ontology.toml"), dir.join("ontology_ext.toml")])
        .expect("shipped ontology loads")
}
