//! Reading heterogeneous CSVs: two sites with different symptom columns are aligned
//! to one vocabulary, missing columns are zero-filled with a warning, and a bad row
//! is reported with its line number.
//!
//! `cargo run --example ingest_csv`

use hierda::data::{align_vocabulary, parse_dataset, serialize_dataset, Domain};

const SITE_A: &str = "\
obs_id,age_years,gender,label,Fever,Cough,Headache
a1,34,female,1,1,1,0
a2,71,male,0,0,1,1
a3,4,female,1,1,0,0
";

const SITE_B: &str = "\
obs_id,age_group,gender,label,fever,sore throat
b1,16-44,m,1,1,1
b2,65+,f,0,0,0
";

fn main() -> hierda::Result<()> {
    let headers = |csv: &str| -> Vec<String> {
        csv.lines().next().unwrap().split(',').skip(4).map(str::to_string).collect()
    };
    let vocab = align_vocabulary(&[headers(SITE_A), headers(SITE_B)])?;
    println!("aligned vocabulary: {:?}", vocab.names());

    for (id, domain, text) in [("site_a", Domain::CitizenScience, SITE_A), ("site_b", Domain::Healthworker, SITE_B)] {
        let parsed = parse_dataset(text, &vocab, id, domain)?;
        for w in &parsed.warnings {
            println!("warning: {w}");
        }
        println!("{id}: {} observations, re-serialized:", parsed.dataset.len());
        print!("{}", serialize_dataset(&parsed.dataset, &vocab)?);
    }

    let broken = SITE_A.replace("a2,71,male", "a2,71,robot");
    match parse_dataset(&broken, &vocab, "site_a", Domain::CitizenScience) {
        Ok(_) => println!("unexpectedly parsed"),
        Err(e) => println!("rejected as expected: {e}"),
    }
    Ok(())
}
