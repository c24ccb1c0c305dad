//! Reading and writing corpus, tree and embedding files.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use topparse_core::dataset::{parse_tsv, Corpus, Rejected, Split};
use topparse_core::preprocess::{EmbeddingLoadReport, EmbeddingTable, EmbeddingTableBuilder};

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Loads a `raw \t tokenized \t tree` corpus. In strict mode the first bad
/// line aborts; otherwise bad lines are returned alongside the corpus.
pub fn load_tsv(path: &Path, split: Split, strict: bool) -> Result<(Corpus, Vec<Rejected>), CliError> {
    let text = read_text(path)?;
    parse_tsv(&text, split, strict).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

/// Lines of a file, without trailing newline characters.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_text(path)?.lines().map(str::to_string).collect())
}

/// Streams a whitespace-separated text embedding file ("word v1 v2 ...").
/// With a vocabulary, only its words are kept and missing ones get random
/// vectors.
pub fn load_embeddings(
    path: &Path,
    vocab: Option<&[String]>,
    seed: u64,
) -> Result<(EmbeddingTable, EmbeddingLoadReport), CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut builder = EmbeddingTableBuilder::new(vocab);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        builder
            .push_line(i + 1, &line)
            .map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    }
    builder.finish(seed).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}
