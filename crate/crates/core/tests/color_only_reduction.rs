//! With the edge weight at zero and adaptation off, the fused tracker must be
//! the plain color-histogram particle filter, weight for weight.

mod support;

use pftrack::sequence::{render_synthetic, SynthSpec};
use pftrack::tracker::{Tracker, TrackerConfig};
use support::color_tracker::reduction_gap;

#[test]
fn zero_edge_weight_reduces_to_color_tracker() {
    let (frames, truth) = render_synthetic(&SynthSpec::occlusion(3)).unwrap();
    let (gap, resampled) = reduction_gap(&frames, truth[0], 17, 10);
    assert!(gap <= 1e-9, "max difference {gap}");
    assert!(resampled > 0);
}

#[test]
fn color_only_config_ignores_edges() {
    let cfg = TrackerConfig::default().color_only();
    let (frames, truth) = render_synthetic(&SynthSpec {
        frame_count: 2,
        ..SynthSpec::default()
    })
    .unwrap();
    let tracker = Tracker::new(cfg, &frames[0], truth[0]).unwrap();
    assert_eq!(tracker.template().theta_color, 1.0);
    assert_eq!(tracker.template().theta_edge, 0.0);
}
