//! Loads the shipped instance files, round-trips them and shows a diagnostic.

use std::path::Path;

use tiekit::cli::instance::to_json;
use tiekit::cli::{parse_instance, parse_instance_str};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for name in ["lottery.json", "second_price.json", "bayes_second_price.json", "coverage_2x2.json"] {
        let s = parse_instance(&dir.join(name)).expect("shipped fixture parses");
        let again = parse_instance_str(&to_json(&s)).expect("serialized form parses");
        println!(
            "{name:<24} players {} items {} grid sizes {:?} round-trip {}",
            s.instance.n_players(),
            s.instance.n_items(),
            (0..s.space.n_players()).map(|i| s.space.grid(i).len()).collect::<Vec<_>>(),
            again == s
        );
    }
    let broken = r#"{"schema_version": 1, "items": ["x"],
        "players": [{"name": "a", "valuation": {"kind": "single_item", "value": 1}}],
        "prior": [[{"valuation": {"kind": "single_item", "value": 1}, "probability": "0.9"}]],
        "mechanism": {"kind": "second_price"}}"#;
    println!("{}", parse_instance_str(broken).unwrap_err());
}
