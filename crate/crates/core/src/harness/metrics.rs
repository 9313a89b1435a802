use crate::error::{Error, Result};
use crate::model::ModelOutput;
use crate::superpoint::SuperPointPartition;

/// Mean IoU and the per-class values it averages. A class absent from both
/// prediction and ground truth has no IoU (`None`) and is left out of the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Miou {
    pub miou: f64,
    pub per_class: Vec<Option<f64>>,
}

fn check_labels(values: &[u32], c: usize, what: &str) -> Result<()> {
    match values.iter().find(|&&v| v as usize >= c) {
        Some(&label) => Err(Error::LabelOutOfRange { label, num_classes: c, context: what.to_string() }),
        None => Ok(()),
    }
}

/// IoU per class, `TP / (TP + FP + FN)`, accumulated over all given points.
pub fn miou(predictions: &[u32], gt: &[u32], num_classes: usize) -> Result<Miou> {
    if predictions.len() != gt.len() {
        return Err(Error::LengthMismatch { what: "predictions", got: predictions.len(), expected: gt.len() });
    }
    if gt.is_empty() {
        return Err(Error::EmptyInput("mIoU over zero points"));
    }
    check_labels(predictions, num_classes, "prediction")?;
    check_labels(gt, num_classes, "ground truth")?;
    let mut tp = vec![0u64; num_classes];
    let mut pred_count = vec![0u64; num_classes];
    let mut gt_count = vec![0u64; num_classes];
    for (&p, &g) in predictions.iter().zip(gt) {
        pred_count[p as usize] += 1;
        gt_count[g as usize] += 1;
        if p == g {
            tp[p as usize] += 1;
        }
    }
    let per_class: Vec<Option<f64>> = (0..num_classes)
        .map(|c| {
            let union = pred_count[c] + gt_count[c] - tp[c];
            (union > 0).then(|| tp[c] as f64 / union as f64)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let miou = present.iter().sum::<f64>() / present.len() as f64;
    Ok(Miou { miou, per_class })
}

/// mIoU computed per shape, then averaged over shapes.
pub fn instance_miou(shapes: &[(&[u32], &[u32])], num_classes: usize) -> Result<f64> {
    if shapes.is_empty() {
        return Err(Error::EmptyInput("instance mIoU over zero shapes"));
    }
    let mut total = 0.0;
    for (pred, gt) in shapes {
        total += miou(pred, gt, num_classes)?.miou;
    }
    Ok(total / shapes.len() as f64)
}

/// Mean squared distance of each point's posterior to its super-point's mean
/// posterior, averaged over super-points with at least two members.
pub fn superpoint_posterior_variance(output: &ModelOutput, partition: &SuperPointPartition) -> Result<f64> {
    if output.len() != partition.len() {
        return Err(Error::LengthMismatch { what: "partition", got: partition.len(), expected: output.len() });
    }
    let c = output.num_classes;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut mean = vec![0.0; c];
    for members in partition.clusters().filter(|m| m.len() > 1) {
        mean.iter_mut().for_each(|v| *v = 0.0);
        for &i in members {
            for (m, p) in mean.iter_mut().zip(output.posterior(i as usize)) {
                *m += p;
            }
        }
        let inv = 1.0 / members.len() as f64;
        mean.iter_mut().for_each(|v| *v *= inv);
        let spread: f64 = members
            .iter()
            .map(|&i| output.posterior(i as usize).iter().zip(&mean).map(|(p, m)| (p - m).powi(2)).sum::<f64>())
            .sum();
        sum += spread * inv;
        count += 1;
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Sample mean and (n - 1) standard deviation; the deviation is 0 for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Standard error of the difference of two independent sample means.
pub fn pooled_standard_error(a: &[f64], b: &[f64]) -> f64 {
    let (_, sa) = mean_std(a);
    let (_, sb) = mean_std(b);
    (sa * sa / a.len() as f64 + sb * sb / b.len() as f64).sqrt()
}
