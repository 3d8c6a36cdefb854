use stlgru::gradcheck::{gradient_check, toy_config, DEFAULT_EPS, DEFAULT_TOLERANCE};
use stlgru::model::{Architecture, ModelConfig};
use stlgru::cell::AttentionAxis;

fn check(config: ModelConfig) {
    let report = gradient_check(&config, 17, DEFAULT_EPS).unwrap();
    for t in &report.tensors {
        assert!(
            t.relative_error <= DEFAULT_TOLERANCE,
            "{} {:?}: {} (config {config:?})",
            t.name,
            t.shape,
            t.relative_error
        );
    }
}

#[test]
fn full_model_every_tensor() {
    let cfg = toy_config(Architecture::Stlgru);
    let report = gradient_check(&cfg, 17, DEFAULT_EPS).unwrap();
    let names: Vec<&str> = report.tensors.iter().map(|t| t.name.as_str()).collect();
    for expected in ["embedding", "gcn_w", "proj", "psi", "w_z", "u_z", "w_r", "u_r", "w_h", "u_h", "head_w1", "head_b1", "head_w2", "head_b2"] {
        assert!(names.contains(&expected), "{expected} missing");
    }
    // the embedding must actually receive gradient through the relaxed graph
    let emb = report.tensors.iter().find(|t| t.name == "embedding").unwrap();
    assert!(emb.max_abs_gradient > 1e-8);
    assert!(report.passed(DEFAULT_TOLERANCE), "{}", report.max_relative_error());
}

#[test]
fn node_axis_attention() {
    check(ModelConfig {
        attention_axis: AttentionAxis::Node,
        ..toy_config(Architecture::Stlgru)
    });
}

#[test]
fn ablated_variants() {
    for (use_gumbel, use_maa) in [(false, true), (true, false), (false, false)] {
        check(ModelConfig {
            use_gumbel,
            use_maa,
            ..toy_config(Architecture::Stlgru)
        });
    }
}

#[test]
fn recurrent_and_convolutional_baselines() {
    for arch in [Architecture::GcnGru, Architecture::GcnLstm, Architecture::GcnTcn] {
        check(toy_config(arch));
    }
}
