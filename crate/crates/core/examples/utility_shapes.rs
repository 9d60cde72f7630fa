//! The utility battery: values on a few payoffs and the shape certificate.

use tiekit::utility_models::{certify_shape, parse_battery, standard_grid, UtilitySpec};

fn main() -> tiekit::Result<()> {
    let specs = parse_battery("standard,cara:2")?;
    for spec in &specs {
        // Lowest payoff we expect to feed the log utility.
        let u = spec.resolve(-3.0);
        let values: Vec<String> = [-3.0, -1.0, 0.0, 1.0, 5.0]
            .iter()
            .map(|&x| format!("{:>8.4}", u.eval(x).unwrap()))
            .collect();
        let certified = certify_shape(&u, &standard_grid(&u))?;
        let label = match spec {
            UtilitySpec::LogAuto => format!("{spec} = {u}"),
            UtilitySpec::Fixed(_) => u.to_string(),
        };
        println!("{label:<22} {}  concave+monotone: {certified}", values.join(" "));
    }
    Ok(())
}
