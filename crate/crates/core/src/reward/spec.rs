use serde::{Deserialize, Serialize};

use crate::embedding::{GoalSpec, Modality, Polarity};

/// Reward selection as written in run configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardSpec {
    LordOpposite {
        modality: Modality,
        /// Overrides the default opposite goal for the modality.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal: Option<String>,
    },
    TargetGoal {
        modality: Modality,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal: Option<String>,
    },
    Grad,
    Constant,
    /// GRAD speed term alone.
    Speed,
    Composite {
        components: Vec<WeightedReward>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedReward {
    pub weight: f64,
    #[serde(flatten)]
    pub spec: RewardSpec,
}

impl RewardSpec {
    pub fn lord(modality: Modality) -> Self {
        RewardSpec::LordOpposite { modality, goal: None }
    }

    pub fn target(modality: Modality) -> Self {
        RewardSpec::TargetGoal { modality, goal: None }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            RewardSpec::Composite { components } => {
                if components.is_empty() {
                    return Err("composite reward needs at least one component".into());
                }
                for c in components {
                    if !c.weight.is_finite() {
                        return Err("composite weights must be finite".into());
                    }
                    c.spec.validate()?;
                }
                Ok(())
            }
            RewardSpec::LordOpposite { goal: Some(g), .. } | RewardSpec::TargetGoal { goal: Some(g), .. }
                if g.trim().is_empty() =>
            {
                Err("goal text must not be empty".into())
            }
            _ => Ok(()),
        }
    }

    pub fn goal(&self) -> Option<GoalSpec> {
        let (modality, goal, polarity) = match self {
            RewardSpec::LordOpposite { modality, goal } => (*modality, goal, Polarity::Opposite),
            RewardSpec::TargetGoal { modality, goal } => (*modality, goal, Polarity::Target),
            _ => return None,
        };
        let spec = GoalSpec::default_for(modality, polarity);
        Some(match goal {
            Some(text) => spec.with_text(text.clone()),
            None => spec,
        })
    }

    /// Short identifier used as a column name in logs.
    pub fn name(&self) -> String {
        match self {
            RewardSpec::LordOpposite { modality, .. } => format!("lord_{modality}"),
            RewardSpec::TargetGoal { modality, .. } => format!("target_{modality}"),
            RewardSpec::Grad => "grad".into(),
            RewardSpec::Constant => "constant".into(),
            RewardSpec::Speed => "speed".into(),
            RewardSpec::Composite { components } => {
                let parts: Vec<String> = components.iter().map(|c| format!("{}x{}", c.weight, c.spec.name())).collect();
                format!("composite({})", parts.join("+"))
            }
        }
    }

    /// Modalities whose embedders this spec needs.
    pub fn modalities(&self) -> Vec<Modality> {
        let mut out = vec![];
        self.collect_modalities(&mut out);
        out
    }

    fn collect_modalities(&self, out: &mut Vec<Modality>) {
        match self {
            RewardSpec::LordOpposite { modality, .. } | RewardSpec::TargetGoal { modality, .. } => {
                if !out.contains(modality) {
                    out.push(*modality);
                }
            }
            RewardSpec::Composite { components } => components.iter().for_each(|c| c.spec.collect_modalities(out)),
            _ => {}
        }
    }
}
