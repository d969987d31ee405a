//! Binary → multiclass transfer learning.
//!
//! Every feature-extraction parameter (conv, batch norm including running
//! statistics, hidden dense) is copied verbatim from the trained binary
//! model; the final dense layer's class columns are redistributed by name,
//! and the one new class column is initialized per [`NewClassInit`].

use std::path::Path;

use crate::arch::{ArchitectureSpec, Model};
use crate::error::{Error, Result};
use crate::persistence;
use crate::tensor::Tensor;

/// Label correspondence between a binary source head and a multiclass
/// target head. Exactly one target class (the new one) has no source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    pub source_classes: Vec<String>,
    pub target_classes: Vec<String>,
    /// (source index, target index) pairs, one per source class.
    pub correspondence: Vec<(usize, usize)>,
}

impl ClassMap {
    /// Match source labels to target positions by name.
    pub fn by_name(source_classes: &[String], target_classes: &[String]) -> Result<Self> {
        let mut correspondence = Vec::with_capacity(source_classes.len());
        for (s, name) in source_classes.iter().enumerate() {
            let t = target_classes
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| {
                    Error::Config(format!("source class '{name}' not present in target classes"))
                })?;
            correspondence.push((s, t));
        }
        let map = Self {
            source_classes: source_classes.to_vec(),
            target_classes: target_classes.to_vec(),
            correspondence,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if self.correspondence.len() != self.source_classes.len() {
            return Err(Error::Config(
                "class map must cover every source class".into(),
            ));
        }
        let mut seen = vec![false; self.target_classes.len()];
        for &(s, t) in &self.correspondence {
            if s >= self.source_classes.len() || t >= self.target_classes.len() {
                return Err(Error::Config(format!("class map index ({s}, {t}) out of range")));
            }
            if seen[t] {
                return Err(Error::Config(format!(
                    "target class '{}' mapped twice",
                    self.target_classes[t]
                )));
            }
            seen[t] = true;
        }
        let unmapped = seen.iter().filter(|&&v| !v).count();
        if unmapped != 1 {
            return Err(Error::Config(format!(
                "exactly one target class must be new, found {unmapped}"
            )));
        }
        Ok(())
    }

    /// Index of the single unmapped (new) target class.
    pub fn new_class_index(&self) -> usize {
        let mut seen = vec![false; self.target_classes.len()];
        for &(_, t) in &self.correspondence {
            seen[t] = true;
        }
        seen.iter().position(|&v| !v).expect("validated map")
    }
}

/// Initialization of the new class column in the target head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NewClassInit {
    /// Zero column: mapped-class logits equal the binary model's exactly.
    #[default]
    Zeros,
    /// Elementwise mean of the source columns.
    MeanOfSources,
}

impl std::str::FromStr for NewClassInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(NewClassInit::Zeros),
            "mean-of-sources" | "mean_of_sources" => Ok(NewClassInit::MeanOfSources),
            other => Err(Error::Config(format!(
                "unknown new-class init '{other}' (expected zeros or mean-of-sources)"
            ))),
        }
    }
}

/// Redistribute a trained 2-class model into a 3-class head.
///
/// Requires identical block stacks, hidden width and input; rejects
/// cross-depth transfers.
pub fn transfer_binary_to_multiclass(
    binary: &Model,
    target_spec: &ArchitectureSpec,
    map: &ClassMap,
    init: NewClassInit,
) -> Result<Model> {
    if binary.num_classes() != 2 {
        return Err(Error::TransferSource(format!(
            "transfer source must be a 2-class binary model, got {} classes",
            binary.num_classes()
        )));
    }
    if target_spec.num_classes != 3 {
        return Err(Error::Config(format!(
            "transfer target must have 3 classes, got {}",
            target_spec.num_classes
        )));
    }
    if binary.spec.blocks != target_spec.blocks
        || binary.spec.dense_hidden != target_spec.dense_hidden
        || binary.spec.input != target_spec.input
    {
        return Err(Error::IncompatibleArchitecture(format!(
            "source '{}' and target '{}' differ in conv stack, hidden width or input",
            binary.spec.name, target_spec.name
        )));
    }
    map.validate()?;
    if map.source_classes != binary.spec.class_names {
        return Err(Error::Config(format!(
            "class map source {:?} does not match binary model classes {:?}",
            map.source_classes, binary.spec.class_names
        )));
    }
    if map.target_classes != target_spec.class_names {
        return Err(Error::Config(format!(
            "class map target {:?} does not match target spec classes {:?}",
            map.target_classes, target_spec.class_names
        )));
    }

    let mut target = crate::arch::build(target_spec, binary.seed)?;
    // Feature extractor copies verbatim, running statistics included.
    for (dst, src) in target.blocks.iter_mut().zip(&binary.blocks) {
        dst.conv = src.conv.clone();
        dst.bn = src.bn.clone();
    }
    target.dense1 = binary.dense1.clone();

    let hidden = target_spec.dense_hidden;
    let tc = target_spec.num_classes;
    let mut head_w = Tensor::zeros(&[hidden, tc])?;
    let mut head_b = Tensor::zeros(&[tc])?;
    for &(s, t) in &map.correspondence {
        for row in 0..hidden {
            head_w.data_mut()[row * tc + t] = binary.dense2.weights.data()[row * 2 + s];
        }
        head_b.data_mut()[t] = binary.dense2.bias.data()[s];
    }
    if init == NewClassInit::MeanOfSources {
        let new = map.new_class_index();
        for row in 0..hidden {
            let mean = (binary.dense2.weights.data()[row * 2]
                + binary.dense2.weights.data()[row * 2 + 1])
                / 2.0;
            head_w.data_mut()[row * tc + new] = mean;
        }
        head_b.data_mut()[new] =
            (binary.dense2.bias.data()[0] + binary.dense2.bias.data()[1]) / 2.0;
    }
    target.dense2 = crate::layers::Dense::new(head_w, head_b)?;
    Ok(target)
}

/// Load a model file and require a 2-class head.
pub fn load_binary_for_transfer(path: &Path) -> Result<Model> {
    let model = persistence::load(path)?;
    if model.num_classes() != 2 {
        return Err(Error::TransferSource(format!(
            "{} holds a {}-class model; transfer needs a binary source",
            path.display(),
            model.num_classes()
        )));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{build, spec_meso4};
    use crate::gradcheck;

    fn binary_names() -> Vec<String> {
        vec!["DeepFake".into(), "Real".into()]
    }

    fn target_names() -> Vec<String> {
        vec!["DeepFake".into(), "FaceSwap".into(), "Real".into()]
    }

    fn trained_binary() -> Model {
        let spec = spec_meso4(2, binary_names())
            .unwrap()
            .with_input(32, 32)
            .unwrap();
        let mut m = build(&spec, 77).unwrap();
        // nudge a few tensors so "copied" is distinguishable from "rebuilt"
        m.blocks[1].bn.running_mean.data_mut()[2] = 0.31;
        m.dense2.bias.data_mut()[0] = -0.4;
        m.dense2.bias.data_mut()[1] = 0.9;
        m
    }

    fn target_spec() -> ArchitectureSpec {
        spec_meso4(3, target_names())
            .unwrap()
            .with_input(32, 32)
            .unwrap()
    }

    #[test]
    fn class_map_by_name_finds_the_new_class() {
        let map = ClassMap::by_name(&binary_names(), &target_names()).unwrap();
        assert_eq!(map.correspondence, vec![(0, 0), (1, 2)]);
        assert_eq!(map.new_class_index(), 1);
    }

    #[test]
    fn class_map_rejects_missing_source() {
        let err = ClassMap::by_name(
            &["DeepFake".into(), "Morph".into()],
            &target_names(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn non_head_parameters_copy_bitwise() {
        let binary = trained_binary();
        let map = ClassMap::by_name(&binary_names(), &target_names()).unwrap();
        let target =
            transfer_binary_to_multiclass(&binary, &target_spec(), &map, NewClassInit::Zeros)
                .unwrap();
        for (src, dst) in binary.blocks.iter().zip(&target.blocks) {
            assert_eq!(src.conv.weights, dst.conv.weights);
            assert_eq!(src.conv.bias, dst.conv.bias);
            assert_eq!(src.bn.gamma, dst.bn.gamma);
            assert_eq!(src.bn.beta, dst.bn.beta);
            assert_eq!(src.bn.running_mean, dst.bn.running_mean);
            assert_eq!(src.bn.running_var, dst.bn.running_var);
        }
        assert_eq!(binary.dense1.weights, target.dense1.weights);
        assert_eq!(binary.dense1.bias, target.dense1.bias);
    }

    #[test]
    fn mapped_head_columns_copy_and_new_column_is_zero() {
        let binary = trained_binary();
        let map = ClassMap::by_name(&binary_names(), &target_names()).unwrap();
        let target =
            transfer_binary_to_multiclass(&binary, &target_spec(), &map, NewClassInit::Zeros)
                .unwrap();
        let tw = &target.dense2.weights;
        let bw = &binary.dense2.weights;
        for row in 0..16 {
            assert_eq!(tw.data()[row * 3], bw.data()[row * 2]); // DeepFake
            assert_eq!(tw.data()[row * 3 + 1], 0.0); // FaceSwap (new)
            assert_eq!(tw.data()[row * 3 + 2], bw.data()[row * 2 + 1]); // Real
        }
        assert_eq!(target.dense2.bias.data(), &[-0.4, 0.0, 0.9]);
    }

    #[test]
    fn mean_of_sources_fills_the_new_column() {
        let binary = trained_binary();
        let map = ClassMap::by_name(&binary_names(), &target_names()).unwrap();
        let target = transfer_binary_to_multiclass(
            &binary,
            &target_spec(),
            &map,
            NewClassInit::MeanOfSources,
        )
        .unwrap();
        let bw = &binary.dense2.weights;
        for row in 0..16 {
            let mean = (bw.data()[row * 2] + bw.data()[row * 2 + 1]) / 2.0;
            assert_eq!(target.dense2.weights.data()[row * 3 + 1], mean);
        }
        assert_eq!(target.dense2.bias.data()[1], (-0.4 + 0.9) / 2.0);
    }

    #[test]
    fn zeros_init_preserves_mapped_logits_exactly() {
        let binary = trained_binary();
        let map = ClassMap::by_name(&binary_names(), &target_names()).unwrap();
        let target =
            transfer_binary_to_multiclass(&binary, &target_spec(), &map, NewClassInit::Zeros)
                .unwrap();
        let mut rng = crate::rng::stream_from_seed(91);
        for _ in 0..5 {
            let x = gradcheck::uniform_tensor(&[1, 3, 32, 32], &mut rng, 0.0, 1.0);
            let bl = binary.infer_logits(&x).unwrap();
            let tl = target.infer_logits(&x).unwrap();
            for &(s, t) in &map.correspondence {
                assert_eq!(bl.data()[s], tl.data()[t], "logit drift at ({s},{t})");
            }
        }
    }

    #[test]
    fn cross_depth_transfer_is_rejected() {
        let binary = trained_binary();
        let map = ClassMap::by_name(&binary_names(), &target_names()).unwrap();
        let deep = crate::arch::spec_meso_plus6(3, target_names())
            .unwrap()
            .with_input(64, 64)
            .unwrap();
        assert!(matches!(
            transfer_binary_to_multiclass(&binary, &deep, &map, NewClassInit::Zeros),
            Err(Error::IncompatibleArchitecture(_))
        ));
    }

    #[test]
    fn three_class_source_is_rejected() {
        let spec = target_spec();
        let not_binary = build(&spec, 1).unwrap();
        let map = ClassMap::by_name(&binary_names(), &target_names()).unwrap();
        assert!(matches!(
            transfer_binary_to_multiclass(&not_binary, &spec, &map, NewClassInit::Zeros),
            Err(Error::TransferSource(_))
        ));
    }

    #[test]
    fn load_binary_for_transfer_round_trips_and_validates() {
        let tmp = tempfile::tempdir().unwrap();
        let binary = trained_binary();
        let path = tmp.path().join("bin.meso");
        crate::persistence::save(&binary, &path).unwrap();
        let loaded = load_binary_for_transfer(&path).unwrap();
        let mut rng = crate::rng::stream_from_seed(93);
        let x = gradcheck::uniform_tensor(&[1, 3, 32, 32], &mut rng, 0.0, 1.0);
        assert_eq!(
            binary.forward_infer(&x).unwrap(),
            loaded.forward_infer(&x).unwrap()
        );

        let spec = target_spec();
        let three = build(&spec, 1).unwrap();
        let path3 = tmp.path().join("three.meso");
        crate::persistence::save(&three, &path3).unwrap();
        assert!(matches!(
            load_binary_for_transfer(&path3),
            Err(Error::TransferSource(_))
        ));
    }
}
