//! A small warp-speed rejection-rate table over pairs of matrix
//! distributions (one permutation per replicate, pooled critical values).
//!
//! Run with: cargo run --release --example power_table

use hankel_cpd::cpstat::StatConfig;
use hankel_cpd::distributions::DistributionSpec;
use hankel_cpd::kernel::KernelConfig;
use hankel_cpd::resample::{warp_speed_power, ResampleConfig};

fn main() {
    let n = 40;
    let k = 20;
    let replicates = 200; // enough for a demo; studies use 500+
    let wishart = DistributionSpec::wishart(2, 2.5);
    let wishart2 = DistributionSpec::wishart(2, 2.5).with_scale(vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
    let inv_wishart = DistributionSpec::inv_wishart(2, 4.0);
    let cov_uniform = DistributionSpec::cov_uniform(2);
    let cov_t = DistributionSpec::cov_t(2, 5.0);

    let cells: Vec<(&str, &DistributionSpec, &DistributionSpec)> = vec![
        ("W(2.5,I)    vs itself (size)", &wishart, &wishart),
        ("W(2.5,I)    vs W(2.5,2I)", &wishart, &wishart2),
        ("W(2.5,I)    vs IW(4,2.5I)", &wishart, &inv_wishart),
        ("CMU         vs W(2.5,I)", &cov_uniform, &wishart),
        ("CMT(5,I)    vs W(2.5,I)", &cov_t, &wishart),
    ];

    println!("n = {n}, change at k = {k}, alpha = 0.05, {replicates} replicates");
    println!("{:<34} gamma=0.5  gamma=1.0", "pair");
    for (label, left, right) in cells {
        let mut rates = Vec::new();
        for gamma in [0.5, 1.0] {
            let est = warp_speed_power(
                left,
                right,
                n,
                k,
                &StatConfig { gamma },
                &KernelConfig::default(),
                &ResampleConfig {
                    seed: 99,
                    ..ResampleConfig::default()
                },
                replicates,
            )
            .unwrap();
            rates.push(est.rejection_rate);
        }
        println!("{label:<34} {:>8.3}  {:>8.3}", rates[0], rates[1]);
    }
}
