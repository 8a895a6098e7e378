use crate::error::{Error, Result};

/// The four loss terms, in the order used everywhere (history columns,
/// uncertainty weights, state blocks).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Cnode,
    Dnode,
    Graph,
    Se,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::Cnode, Component::Dnode, Component::Graph, Component::Se];

    pub fn name(self) -> &'static str {
        match self {
            Component::Cnode => "cnode",
            Component::Dnode => "dnode",
            Component::Graph => "graph",
            Component::Se => "se",
        }
    }
}

/// Trainable log standard deviations `alpha_i = log σ_i`, one per component.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyWeights {
    pub alpha: [f64; 4],
}

impl Default for UncertaintyWeights {
    fn default() -> Self {
        Self { alpha: [0.0; 4] }
    }
}

impl UncertaintyWeights {
    /// Multiplier `1 / (2σ²) = exp(-2 alpha) / 2` applied to component `i`.
    pub fn scale(&self, i: usize) -> f64 {
        (-2.0 * self.alpha[i]).exp() / 2.0
    }

    /// Reported loss weight `exp(-alpha)`.
    pub fn reported(&self) -> [f64; 4] {
        self.alpha.map(|a| (-a).exp())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    /// d total / d L_i (zero for disabled components).
    pub component_scale: [f64; 4],
    pub grad_alpha: [f64; 4],
}

/// `L = Σ L_i / (2σ_i²) + Σ log σ_i` over the enabled components; a disabled
/// component (`None`) contributes neither its term nor its `log σ_i`.
pub fn total_loss(components: &[Option<f64>; 4], u: &UncertaintyWeights) -> Result<TotalLoss> {
    let mut value = 0.0;
    let mut component_scale = [0.0; 4];
    let mut grad_alpha = [0.0; 4];
    for (i, c) in components.iter().enumerate() {
        let Some(l) = *c else { continue };
        if !l.is_finite() {
            return Err(Error::Numeric(format!(
                "loss component {} is not finite ({l})",
                Component::ALL[i].name()
            )));
        }
        let s = u.scale(i);
        value += s * l + u.alpha[i];
        component_scale[i] = s;
        grad_alpha[i] = 1.0 - 2.0 * s * l;
    }
    Ok(TotalLoss {
        value,
        component_scale,
        grad_alpha,
    })
}
