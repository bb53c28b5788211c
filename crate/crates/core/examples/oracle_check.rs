// Closed-form bounds against two independent computations: the greedy
// solution of the density-ratio program under the implied treatment box, and
// a grid search over joint laws with a binary confounder.

use demsm::{
    binary_u_grid_oracle, demsm_nu1_bounds, greedy_density_ratio_bound, implied_lambda, Direction, GammaPair,
    LambdaPair, WeightedDistribution,
};

pub struct OracleRow {
    pub closed_form: f64,
    pub greedy: f64,
    pub grid: f64,
}

pub fn run_example() -> demsm::Result<Vec<OracleRow>> {
    let y = WeightedDistribution::from_pairs([(0.0, 0.1), (0.2, 0.3), (0.5, 0.2), (0.9, 0.4)])?;
    let lam = LambdaPair::new(0.3, 2.0)?;
    let gam = GammaPair::new(0.5, 4.0)?;
    let implied = implied_lambda(lam, gam)?.as_pair();
    let bounds = demsm_nu1_bounds(&y, lam, gam)?;

    let mut rows = Vec::new();
    for (dir, closed_form) in [(Direction::Max, bounds.hi), (Direction::Min, bounds.lo)] {
        let row = OracleRow {
            closed_form,
            greedy: greedy_density_ratio_bound(&y, implied, dir)?,
            grid: binary_u_grid_oracle(&y, lam, gam, dir, 1e-3)?,
        };
        println!(
            "{dir:?}: closed form {:.9}  greedy {:.9}  grid {:.9}",
            row.closed_form, row.greedy, row.grid
        );
        rows.push(row);
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> demsm::Result<()> {
    run_example().map(|_| ())
}
