use super::{DistillationConfig, ModelError, TagDistribution, TeacherDistribution};
use crate::autodiff::{kl_divergence, softmax, Tape, Var};
use crate::corpus::TagId;
use crate::rules::RuleVector;

/// Teacher distribution `q_j ∝ p_j · exp(-C (1 - r_j))`.
pub fn project_teacher(
    student: &TagDistribution,
    rules: &RuleVector,
    config: &DistillationConfig,
) -> Result<TeacherDistribution, ModelError> {
    if student.len() != rules.len() {
        return Err(ModelError::LengthMismatch {
            probs: student.len(),
            rules: rules.len(),
        });
    }
    if !rules.bits().iter().any(|&b| b) {
        return Err(ModelError::InvalidRuleVector);
    }
    let damp = (-config.penalty).exp();
    let weighted: Vec<f64> = student
        .probs()
        .iter()
        .zip(rules.bits())
        .map(|(&p, &r)| if r { p } else { p * damp })
        .collect();
    let z: f64 = weighted.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(ModelError::Config(format!("teacher normaliser {z} is not positive")));
    }
    Ok(TagDistribution::new_unchecked(weighted.into_iter().map(|w| w / z).collect()))
}

fn check_lengths(n: usize, gold: usize, other: usize) -> Result<(), ModelError> {
    if n == 0 {
        return Err(ModelError::EmptySentence);
    }
    for got in [gold, other] {
        if got != n {
            return Err(ModelError::RuleLength { expected: n, got });
        }
    }
    Ok(())
}

/// Mean over tokens of `(1 - π) CE(gold, p) + π KL(q ‖ p)` for student `p`
/// and fixed teacher `q`.
pub fn distill_loss(
    student: &[TagDistribution],
    teacher: &[TeacherDistribution],
    gold: &[TagId],
    imitation: f64,
) -> Result<f64, ModelError> {
    check_lengths(student.len(), gold.len(), teacher.len())?;
    let mut total = 0.0;
    for ((p, q), &g) in student.iter().zip(teacher).zip(gold) {
        if g >= p.len() {
            return Err(ModelError::Config(format!("gold tag {g} outside {} classes", p.len())));
        }
        let ce = -p.probs()[g].max(f64::MIN_POSITIVE).ln();
        let kl = kl_divergence(q.probs(), p.probs())?;
        total += (1.0 - imitation) * ce + imitation * kl;
    }
    Ok(total / student.len() as f64)
}

/// Teacher distributions for a whole sentence.
pub fn project_sentence(
    student: &[TagDistribution],
    rules: &[RuleVector],
    config: &DistillationConfig,
) -> Result<Vec<TeacherDistribution>, ModelError> {
    if student.len() != rules.len() {
        return Err(ModelError::RuleLength {
            expected: student.len(),
            got: rules.len(),
        });
    }
    student
        .iter()
        .zip(rules)
        .map(|(p, r)| project_teacher(p, r, config))
        .collect()
}

/// Records the distillation loss for `logits` on `tape` and returns the scalar.
pub fn distill_loss_on_tape(
    tape: &mut Tape,
    logits: &[Var],
    gold: &[TagId],
    rules: &[RuleVector],
    config: &DistillationConfig,
    imitation: f64,
) -> Result<Var, ModelError> {
    check_lengths(logits.len(), gold.len(), rules.len())?;
    let mut terms = Vec::with_capacity(logits.len() * 2);
    for ((&z, &g), r) in logits.iter().zip(gold).zip(rules) {
        let p = TagDistribution::new_unchecked(softmax(tape.value(z).data()));
        let q = project_teacher(&p, r, config)?;
        let ce = tape.softmax_cross_entropy(z, g)?;
        terms.push(tape.scale(ce, 1.0 - imitation));
        if imitation > 0.0 {
            let kl = tape.softmax_kl(z, q.probs())?;
            terms.push(tape.scale(kl, imitation));
        }
    }
    let sum = tape.sum(&terms)?;
    Ok(tape.scale(sum, 1.0 / logits.len() as f64))
}
