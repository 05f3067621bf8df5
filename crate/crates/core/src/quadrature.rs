//! Symmetric triangle rules (weights relative to the area) and Gauss rules on
//! `[0, 1]` (weights relative to the length).

use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    pub degree: usize,
    /// Abscissae in `[0, 1]` measured from the first endpoint.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

struct Builder {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    fn centroid(mut self, w: f64) -> Self {
        self.points.push([1.0 / 3.0; 3]);
        self.weights.push(w);
        self
    }

    /// Orbit of `(a, b, b)`.
    fn orbit3(mut self, w: f64, a: f64, b: f64) -> Self {
        for p in [[a, b, b], [b, a, b], [b, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
        self
    }

    /// Orbit of `(a, b, c)` with distinct entries.
    fn orbit6(mut self, w: f64, a: f64, b: f64, c: f64) -> Self {
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
        self
    }

    fn build(self, degree: usize) -> TriangleRule {
        TriangleRule {
            degree,
            points: self.points,
            weights: self.weights,
        }
    }
}

/// Dunavant 12-point rule, exact to degree 6.
pub fn triangle_degree6() -> &'static TriangleRule {
    static RULE: OnceLock<TriangleRule> = OnceLock::new();
    RULE.get_or_init(|| {
        Builder::new()
            .orbit3(0.116786275726379, 0.501426509658179, 0.249286745170910)
            .orbit3(0.050844906370207, 0.873821971016996, 0.063089014491502)
            .orbit6(0.082851075618374, 0.053145049844817, 0.310352451033784, 0.636502499121399)
            .build(6)
    })
}

/// Dunavant 16-point rule, exact to degree 8.
pub fn triangle_degree8() -> &'static TriangleRule {
    static RULE: OnceLock<TriangleRule> = OnceLock::new();
    RULE.get_or_init(|| {
        Builder::new()
            .centroid(0.144315607677787)
            .orbit3(0.095091634267285, 0.081414823414554, 0.459292588292723)
            .orbit3(0.103217370534718, 0.658861384496480, 0.170569307751760)
            .orbit3(0.032458497623198, 0.898905543365938, 0.050547228317031)
            .orbit6(0.027230314174435, 0.008394777409958, 0.263112829634638, 0.728492392955404)
            .build(8)
    })
}

/// 4-point Gauss-Legendre rule on `[0, 1]`, exact to degree 7.
pub fn edge_gauss4() -> &'static EdgeRule {
    static RULE: OnceLock<EdgeRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let nodes = [
            (-0.8611363115940526, 0.3478548451374538),
            (-0.3399810435848563, 0.6521451548625461),
            (0.3399810435848563, 0.6521451548625461),
            (0.8611363115940526, 0.3478548451374538),
        ];
        EdgeRule {
            degree: 7,
            points: nodes.iter().map(|(x, _)| 0.5 * (1.0 + x)).collect(),
            weights: nodes.iter().map(|(_, w)| 0.5 * w).collect(),
        }
    })
}
