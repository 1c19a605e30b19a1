//! Diagnostic sweep (ignored by default): rejection rates for several
//! distribution pairs at n = 40, k = 20, gamma = 0.5.

use hankel_cpd::cpstat::StatConfig;
use hankel_cpd::distributions::DistributionSpec;
use hankel_cpd::kernel::KernelConfig;
use hankel_cpd::resample::{warp_speed_power, ResampleConfig};

#[test]
#[ignore]
fn sweep_alternative_wishart_convention() {
    // standard Wishart with dof a and scale Sigma, expressed through the
    // density-matched parametrization as W(a/2, Sigma^-1 / 2)
    let std_w = |a: f64, sigma_diag: f64| {
        DistributionSpec::wishart(2, a / 2.0).with_scale(vec![
            vec![0.5 / sigma_diag, 0.0],
            vec![0.0, 0.5 / sigma_diag],
        ])
    };
    let left = std_w(2.5, 1.0);
    let cells: Vec<(&str, DistributionSpec)> = vec![
        ("size             ", std_w(2.5, 1.0)),
        ("IW(2.5,I)        ", DistributionSpec::inv_wishart(2, 2.5)),
        ("W(2.5,2I) stdconv", std_w(2.5, 2.0)),
        ("IW(4,2.5I)       ", DistributionSpec::inv_wishart(2, 4.0).with_scale(vec![vec![2.5, 0.0], vec![0.0, 2.5]])),
        ("CMT(5,I)         ", DistributionSpec::cov_t(2, 5.0)),
        ("CMT(1,I)         ", DistributionSpec::cov_t(2, 1.0)),
    ];
    for (n, k) in [(40usize, 20usize), (100, 50)] {
        println!("std-convention Wishart left, n = {n}, k = {k}");
        for (label, right) in &cells {
            let est = warp_speed_power(
                &left,
                right,
                n,
                k,
                &StatConfig { gamma: 0.5 },
                &KernelConfig::default(),
                &ResampleConfig { seed: 0xd1a7, ..ResampleConfig::default() },
                500,
            )
            .unwrap();
            println!("  vs {label}: {:.3}", est.rejection_rate);
        }
    }
}

#[test]
#[ignore]
fn sweep_n40() {
    let w = DistributionSpec::wishart(2, 2.5);
    let cells: Vec<(&str, DistributionSpec)> = vec![
        ("W(2.5,I)   [size]", w.clone()),
        ("IW(2.5,I)        ", DistributionSpec::inv_wishart(2, 2.5)),
        ("CMT(1,I)         ", DistributionSpec::cov_t(2, 1.0)),
        ("CMU              ", DistributionSpec::cov_uniform(2)),
        ("W(2.5,2I)        ", DistributionSpec::wishart(2, 2.5).with_scale(vec![vec![2.0, 0.0], vec![0.0, 2.0]])),
        ("IW(4,2.5I)       ", DistributionSpec::inv_wishart(2, 4.0).with_scale(vec![vec![2.5, 0.0], vec![0.0, 2.5]])),
        ("CMT(5,I)         ", DistributionSpec::cov_t(2, 5.0)),
    ];
    println!("left = W_2(2.5, I_2), n = 40, k = 20, gamma = 0.5, N = 500");
    for (label, right) in cells {
        let est = warp_speed_power(
            &w,
            &right,
            40,
            20,
            &StatConfig { gamma: 0.5 },
            &KernelConfig::default(),
            &ResampleConfig { seed: 0xd1a6, ..ResampleConfig::default() },
            500,
        )
        .unwrap();
        println!("vs {label}: {:.3}", est.rejection_rate);
    }
}
