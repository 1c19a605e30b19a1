//! Multiple change points by recursive binary segmentation, in both split
//! modes.
//!
//! Run with: cargo run --release --example segment_series

use hankel_cpd::distributions::{DistributionSpec, Sampler};
use hankel_cpd::kernel::{gram, KernelConfig};
use hankel_cpd::seeding;
use hankel_cpd::segment::{binary_segmentation, SegmentationConfig, SplitMode};

fn main() {
    // three regimes with strong changes at 30 and 60
    let mut rng = seeding::stream(11, &[]);
    let quiet = Sampler::new(DistributionSpec::cov_uniform(2)).unwrap();
    let loud = Sampler::new(DistributionSpec::wishart(2, 2.5)).unwrap();
    let mut sample = quiet.sample_n(30, &mut rng);
    sample.extend(loud.sample_n(30, &mut rng));
    sample.extend(quiet.sample_n(30, &mut rng));

    let g = gram(&sample, &KernelConfig::default()).unwrap();

    for mode in [SplitMode::PaperMid, SplitMode::AtChangepoint] {
        let report = binary_segmentation(
            &g,
            &SegmentationConfig {
                window: 10,
                nb: 500,
                alpha: 0.05,
                seed: 3,
                gamma: 0.5,
                split_mode: mode,
                ..SegmentationConfig::default()
            },
        )
        .unwrap();
        println!("split mode {mode:?}:");
        println!("  change points: {:?} (true: [30, 60])", report.change_points);
        for node in &report.nodes {
            println!(
                "  segment [{:3}, {:3}): stat = {:.3e}, k* = {:2}, p = {:.3} -> {}",
                node.start,
                node.end,
                node.stat,
                node.k_star,
                node.p,
                if node.accepted { "split" } else { "stop" },
            );
        }
    }
}
