//! Sparse examples and the XMLC repository text format.
//!
//! A dataset file starts with a header line `N d m` followed by one example
//! per line: `l1,l2,... f1:v1 f2:v2 ...`. The label list may be empty, in
//! which case the line starts with a single space.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Feature vector with implicit zeros. Entries are kept sorted by feature id,
/// without duplicates and without explicit zero values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(u32, f32)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a canonical vector from arbitrary pairs. Duplicate feature ids
    /// are rejected; zero values are dropped.
    pub fn from_pairs(mut pairs: Vec<(u32, f32)>) -> std::result::Result<Self, u32> {
        pairs.sort_by_key(|&(id, _)| id);
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(w[0].0);
        }
        pairs.retain(|&(_, v)| v != 0.0);
        Ok(Self { entries: pairs })
    }

    pub fn entries(&self) -> &[(u32, f32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn max_feature(&self) -> Option<u32> {
        self.entries.last().map(|&(id, _)| id)
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, v)| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    /// Unit-norm copy. The zero vector is returned unchanged.
    pub fn l2_normalized(&self) -> Self {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return self.clone();
        }
        let entries = self
            .entries
            .iter()
            .map(|&(id, v)| (id, (f64::from(v) / norm) as f32))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        Self { entries }
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter_map(|&(id, v)| dense.get(id as usize).map(|w| w * f64::from(v)))
            .sum()
    }
}

/// One observation: features plus its (possibly empty) label set. Labels are
/// stored ascending without duplicates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Example {
    pub features: SparseVector,
    labels: Vec<u32>,
}

impl Example {
    pub fn new(features: SparseVector, mut labels: Vec<u32>) -> Self {
        labels.sort_unstable();
        labels.dedup();
        Self { features, labels }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn has_label(&self, label: u32) -> bool {
        self.labels.binary_search(&label).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub num_examples: usize,
    pub num_features: usize,
    pub num_labels: usize,
}

pub fn parse_header(line: &str, line_no: usize) -> Result<DatasetHeader> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 3 {
        return Err(Error::format(
            line_no,
            format!(
                "header needs 3 counts `N d m`, found {} tokens",
                tokens.len()
            ),
        ));
    }
    let mut counts = [0usize; 3];
    for (slot, tok) in counts.iter_mut().zip(&tokens) {
        *slot = tok
            .parse()
            .map_err(|_| Error::format(line_no, format!("bad count `{tok}` in header")))?;
        if *slot == 0 {
            return Err(Error::format(line_no, "header counts must be positive"));
        }
    }
    Ok(DatasetHeader {
        num_examples: counts[0],
        num_features: counts[1],
        num_labels: counts[2],
    })
}

pub fn parse_example(line: &str, line_no: usize) -> Result<Example> {
    let line = line.trim_end_matches(['\n', '\r']);
    // the label field is everything before the first space; empty when the line starts with one
    let (label_field, rest) = match line.find(' ') {
        Some(pos) => (&line[..pos], &line[pos + 1..]),
        None if line.contains(':') => ("", line),
        None => (line, ""),
    };

    let mut labels = Vec::new();
    if !label_field.is_empty() {
        for tok in label_field.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            labels.push(parse_id(tok, "label", line_no)?);
        }
    }

    let mut pairs = Vec::new();
    for tok in rest.split_whitespace() {
        let (id, value) = tok
            .split_once(':')
            .ok_or_else(|| Error::format(line_no, format!("expected `id:value`, got `{tok}`")))?;
        let id = parse_id(id, "feature", line_no)?;
        let value: f32 = value
            .parse()
            .map_err(|_| Error::format(line_no, format!("unparsable value `{value}`")))?;
        if !value.is_finite() {
            return Err(Error::format(
                line_no,
                format!("non-finite value `{value}`"),
            ));
        }
        pairs.push((id, value));
    }
    let features = SparseVector::from_pairs(pairs)
        .map_err(|id| Error::format(line_no, format!("duplicate feature id {id}")))?;
    Ok(Example::new(features, labels))
}

fn parse_id(tok: &str, what: &str, line_no: usize) -> Result<u32> {
    if tok.starts_with('-') {
        return Err(Error::format(
            line_no,
            format!("negative {what} id `{tok}`"),
        ));
    }
    tok.parse()
        .map_err(|_| Error::format(line_no, format!("bad {what} id `{tok}`")))
}

/// Renders one example in the repository line format (no trailing newline).
pub fn format_example(example: &Example) -> String {
    let mut out = String::new();
    for (i, l) in example.labels().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&l.to_string());
    }
    for (id, v) in example.features.iter() {
        out.push(' ');
        out.push_str(&format!("{id}:{v}"));
    }
    if example.features.is_empty() {
        out.push(' ');
    }
    out
}

pub fn write_dataset<W: Write>(
    mut writer: W,
    header: &DatasetHeader,
    examples: &[Example],
) -> Result<()> {
    writeln!(
        writer,
        "{} {} {}",
        header.num_examples, header.num_features, header.num_labels
    )?;
    for ex in examples {
        writeln!(writer, "{}", format_example(ex))?;
    }
    Ok(())
}

/// Streaming reader: holds the header, one reusable line buffer and counters.
pub struct DatasetReader<R> {
    reader: R,
    header: DatasetHeader,
    line: String,
    line_no: usize,
    yielded: usize,
    done: bool,
}

impl<R: BufRead> DatasetReader<R> {
    pub fn new(mut reader: R) -> Result<Self> {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::format(1, "missing header line"));
        }
        let header = parse_header(&line, 1)?;
        line.clear();
        Ok(Self {
            reader,
            header,
            line,
            line_no: 1,
            yielded: 0,
            done: false,
        })
    }

    pub fn header(&self) -> DatasetHeader {
        self.header
    }

    pub fn yielded(&self) -> usize {
        self.yielded
    }

    /// True once the stream is exhausted and the example count differs from the header.
    pub fn count_mismatch(&self) -> bool {
        self.done && self.yielded != self.header.num_examples
    }

    pub fn buffer_capacity(&self) -> usize {
        self.line.capacity()
    }
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<Example>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            self.line.clear();
            match self.reader.read_line(&mut self.line) {
                Ok(0) => {
                    self.done = true;
                    if self.yielded != self.header.num_examples {
                        log::warn!(
                            "header announces {} examples, stream had {}",
                            self.header.num_examples,
                            self.yielded
                        );
                    }
                    return None;
                }
                Ok(_) => {
                    self.line_no += 1;
                    if self.line.trim_end_matches(['\n', '\r']).is_empty() {
                        continue;
                    }
                    self.yielded += 1;
                    return Some(parse_example(&self.line, self.line_no));
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
        }
    }
}

/// Either file-order streaming or a buffered, seeded permutation.
pub enum ExampleStream<R> {
    InOrder(DatasetReader<R>),
    Shuffled(std::vec::IntoIter<Example>),
}

impl<R: BufRead> Iterator for ExampleStream<R> {
    type Item = Result<Example>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            ExampleStream::InOrder(r) => r.next(),
            ExampleStream::Shuffled(it) => it.next().map(Ok),
        }
    }
}

pub fn stream_dataset<R: BufRead>(
    source: R,
    shuffle_seed: Option<u64>,
) -> Result<(DatasetHeader, ExampleStream<R>)> {
    let reader = DatasetReader::new(source)?;
    let header = reader.header();
    match shuffle_seed {
        None => Ok((header, ExampleStream::InOrder(reader))),
        Some(seed) => {
            let mut all = reader.collect::<Result<Vec<_>>>()?;
            shuffle_examples(&mut all, seed);
            Ok((header, ExampleStream::Shuffled(all.into_iter())))
        }
    }
}

pub fn shuffle_examples<T>(items: &mut [T], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
}

/// A fully loaded dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        let reader = DatasetReader::new(BufReader::new(file))?;
        let header = reader.header();
        let examples = reader.collect::<Result<Vec<_>>>()?;
        Ok(Self { header, examples })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        write_dataset(std::io::BufWriter::new(file), &self.header, &self.examples)
    }
}
