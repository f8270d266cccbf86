//! Reading the sparse text format, streaming and shuffled.
//!
//! ```bash
//! cargo run --example parse_dataset
//! ```

use std::io::Cursor;

use oplt::data::{parse_example, stream_dataset, write_dataset, DatasetHeader};

const TEXT: &str = "\
4 10 5
0,3 1:0.5 7:1.0
2 0:1.0
 4:2.0
1,4 2:0.3 9:0.1
";

fn main() -> oplt::Result<()> {
    let (header, stream) = stream_dataset(Cursor::new(TEXT), None)?;
    println!("header: {header:?}");
    let examples: Vec<_> = stream.collect::<oplt::Result<_>>()?;
    for ex in &examples {
        println!(
            "labels {:?} features {:?}",
            ex.labels(),
            ex.features.entries()
        );
    }

    let (_, shuffled) = stream_dataset(Cursor::new(TEXT), Some(7))?;
    let order: Vec<Vec<u32>> = shuffled
        .map(|e| e.map(|e| e.labels().to_vec()))
        .collect::<oplt::Result<_>>()?;
    println!("shuffled label order: {order:?}");

    // malformed lines report their line number
    match parse_example("1,2 3:abc", 5) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }

    let mut out = Vec::new();
    let header = DatasetHeader {
        num_examples: examples.len(),
        ..header
    };
    write_dataset(&mut out, &header, &examples)?;
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}
