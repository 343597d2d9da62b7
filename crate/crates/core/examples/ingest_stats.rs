//! Parse a rating file, apply preprocessing and print dataset statistics.
//!
//! Run with `cargo run --example ingest_stats`.

use std::io::Cursor;

use popbias::ingest::{
    convert_implicit, dataset_stats, filter_users, read_ratings, scale_playcounts, RatingRange,
    Schema,
};

const BOOKS: &str = "\
user_id;isbn;score
alice;0001;8
alice;0002;0
alice;0003;6
bob;0001;10
bob;0004;0
carol;0002;3
";

const PLAYS: &str = "\
user_id,item_id,rating
u1,a,1
u1,b,2
u1,c,3
u2,a,10
u2,c,10
";

pub fn run_example() -> popbias::Result<()> {
    // Semicolon-separated, custom column names, implicit interactions stored as 0.
    let mut schema = Schema::new(RatingRange::new(1.0, 10.0)?);
    schema.delimiter = b';';
    schema.item_column = "isbn".into();
    schema.rating_column = "score".into();
    schema.implicit_marker = Some(0.0);

    let raw = read_ratings(Cursor::new(BOOKS), &schema)?;
    let explicit = convert_implicit(&raw, 0.0, 5.0)?;
    let active = filter_users(&explicit, 2, usize::MAX)?;
    let stats = dataset_stats(&active)?;
    println!("{stats}");
    assert_eq!((stats.n_users, stats.n_items, stats.n_ratings), (2, 4, 5));

    let plays = read_ratings(Cursor::new(PLAYS), &Schema::new(RatingRange::new(1.0, 1e9)?))?;
    let scaled = scale_playcounts(&plays, RatingRange::new(1.0, 1000.0)?)?;
    for r in scaled.ratings() {
        println!(
            "{} {} {:.1}",
            scaled.users()[r.user as usize],
            scaled.items()[r.item as usize],
            r.value
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> popbias::Result<()> {
    run_example()
}
