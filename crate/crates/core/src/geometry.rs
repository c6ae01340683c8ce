//! Planar domains and the transform algebra built on top of them.
//!
//! Every domain is an open set. A point on the boundary is reported as
//! outside, so the first exit of a path is the first strict non-membership.
//! Top-level domains must contain the origin, where every Brownian path of
//! this crate is started.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub re: f64,
    pub im: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { re: 0.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn from_polar(r: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(r * c, r * s)
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Real part of `self * conj(other)`, the Euclidean inner product.
    pub fn dot(self, other: Point) -> f64 {
        self.re * other.re + self.im * other.im
    }

    pub fn cross(self, other: Point) -> f64 {
        self.re * other.im - self.im * other.re
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn reflect_y(self) -> Self {
        Self::new(-self.re, self.im)
    }

    /// `self + s * (other - self)`.
    pub fn lerp(self, other: Point, s: f64) -> Self {
        Self::new(
            self.re + s * (other.re - self.re),
            self.im + s * (other.im - self.im),
        )
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.re, -self.im)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.re * rhs, self.im * rhs)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.re, self.im)
    }
}

/// A planar region. Serializes as `{"type": ..., <fields>}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    Disc {
        center: Point,
        radius: f64,
    },
    #[serde(rename = "strip")]
    VerticalStrip { x_lo: f64, x_hi: f64 },
    #[serde(rename = "rect")]
    Rectangle {
        x_lo: f64,
        x_hi: f64,
        y_lo: f64,
        y_hi: f64,
    },
    #[serde(rename = "polygon")]
    SimplePolygon { vertices: Vec<Point> },
    /// Confocal elliptic annulus `E_beta \ closure(E_alpha)` with foci at
    /// `(-d +- c, 0)`, shifted by `d = c cosh(gamma)` so that the origin lies
    /// on the intermediate ellipse `E_gamma`.
    EllipticAnnulus {
        c: f64,
        alpha: f64,
        gamma: f64,
        beta: f64,
    },
    Scaled {
        inner: Box<Domain>,
        lambda: f64,
    },
    Translated {
        inner: Box<Domain>,
        shift: Point,
    },
    ReflectedY {
        inner: Box<Domain>,
    },
    Intersection {
        a: Box<Domain>,
        b: Box<Domain>,
    },
}

impl Domain {
    pub fn disc(center: Point, radius: f64) -> Result<Self> {
        Domain::Disc { center, radius }.validated()
    }

    pub fn unit_disc() -> Self {
        Domain::Disc {
            center: Point::ORIGIN,
            radius: 1.0,
        }
    }

    pub fn centered_disc(radius: f64) -> Result<Self> {
        Self::disc(Point::ORIGIN, radius)
    }

    pub fn vertical_strip(x_lo: f64, x_hi: f64) -> Result<Self> {
        Domain::VerticalStrip { x_lo, x_hi }.validated()
    }

    pub fn rectangle(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        Domain::Rectangle {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        }
        .validated()
    }

    pub fn polygon(vertices: Vec<Point>) -> Result<Self> {
        Domain::SimplePolygon { vertices }.validated()
    }

    pub fn elliptic_annulus(c: f64, alpha: f64, gamma: f64, beta: f64) -> Result<Self> {
        Domain::EllipticAnnulus {
            c,
            alpha,
            gamma,
            beta,
        }
        .validated()
    }

    pub fn scaled(inner: Domain, lambda: f64) -> Result<Self> {
        Domain::Scaled {
            inner: Box::new(inner),
            lambda,
        }
        .validated()
    }

    pub fn translated(inner: Domain, shift: Point) -> Result<Self> {
        Domain::Translated {
            inner: Box::new(inner),
            shift,
        }
        .validated()
    }

    pub fn reflected_y(inner: Domain) -> Result<Self> {
        Domain::ReflectedY {
            inner: Box::new(inner),
        }
        .validated()
    }

    pub fn intersection(a: Domain, b: Domain) -> Result<Self> {
        Domain::Intersection {
            a: Box::new(a),
            b: Box::new(b),
        }
        .validated()
    }

    /// Parses and validates a JSON domain description.
    pub fn from_json(text: &str) -> Result<Self> {
        let d: Domain = serde_json::from_str(text)?;
        d.validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Checks every structural invariant and that the origin is inside.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        if !self.contains(Point::ORIGIN) {
            return Err(Error::InvalidDomain(
                "origin_inside: the domain does not contain the origin".into(),
            ));
        }
        Ok(())
    }

    fn validate_structure(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidDomain(msg.to_string()));
        match self {
            Domain::Disc { center, radius } => {
                if !center.is_finite() || !radius.is_finite() || *radius <= 0.0 {
                    return bad("disc_radius: radius must be positive and finite");
                }
            }
            Domain::VerticalStrip { x_lo, x_hi } => {
                if !(x_lo.is_finite() && x_hi.is_finite() && *x_lo < 0.0 && 0.0 < *x_hi) {
                    return bad("strip_bounds: need finite x_lo < 0 < x_hi");
                }
            }
            Domain::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => {
                let finite = [x_lo, x_hi, y_lo, y_hi].iter().all(|v| v.is_finite());
                if !finite || x_lo >= x_hi || y_lo >= y_hi {
                    return bad("rect_bounds: need finite x_lo < x_hi and y_lo < y_hi");
                }
            }
            Domain::SimplePolygon { vertices } => validate_polygon(vertices)?,
            Domain::EllipticAnnulus {
                c,
                alpha,
                gamma,
                beta,
            } => {
                let finite = [c, alpha, gamma, beta].iter().all(|v| v.is_finite());
                if !finite || *c <= 0.0 || *alpha <= 0.0 {
                    return bad("annulus_params: need finite c > 0 and alpha > 0");
                }
                if !(alpha < gamma && gamma < beta) {
                    return bad("annulus_order: need alpha < gamma < beta");
                }
            }
            Domain::Scaled { inner, lambda } => {
                if !lambda.is_finite() || *lambda <= 0.0 {
                    return bad("scale_factor: lambda must be positive and finite");
                }
                inner.validate_structure()?;
            }
            Domain::Translated { inner, shift } => {
                if !shift.is_finite() {
                    return bad("shift_finite: translation must be finite");
                }
                inner.validate_structure()?;
            }
            Domain::ReflectedY { inner } => inner.validate_structure()?,
            Domain::Intersection { a, b } => {
                a.validate_structure()?;
                b.validate_structure()?;
            }
        }
        Ok(())
    }

    /// Strict membership; boundary points are outside.
    pub fn contains(&self, z: Point) -> bool {
        match self {
            Domain::Disc { center, radius } => (z - *center).norm_sqr() < radius * radius,
            Domain::VerticalStrip { x_lo, x_hi } => *x_lo < z.re && z.re < *x_hi,
            Domain::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => *x_lo < z.re && z.re < *x_hi && *y_lo < z.im && z.im < *y_hi,
            Domain::SimplePolygon { vertices } => polygon_contains(vertices, z),
            Domain::EllipticAnnulus {
                c,
                alpha,
                gamma,
                beta,
            } => {
                let local = Point::new(z.re + c * gamma.cosh(), z.im);
                ellipse_level(local, *c, *beta) < 1.0 && ellipse_level(local, *c, *alpha) > 1.0
            }
            Domain::Scaled { inner, lambda } => inner.contains(z * (1.0 / lambda)),
            Domain::Translated { inner, shift } => inner.contains(z - *shift),
            Domain::ReflectedY { inner } => inner.contains(z.reflect_y()),
            Domain::Intersection { a, b } => a.contains(z) && b.contains(z),
        }
    }

    /// Radius of an open disc about `z` that lies inside the domain.
    ///
    /// Exact for discs, strips and rectangles, and for polygons (distance to
    /// the nearest edge). Other variants return a valid, possibly smaller,
    /// radius.
    pub fn boundary_distance_lower_bound(&self, z: Point) -> Result<f64> {
        if !self.contains(z) {
            return Err(Error::OutsideDomain { re: z.re, im: z.im });
        }
        Ok(self.distance_bound_unchecked(z).max(0.0))
    }

    /// Same as [`boundary_distance_lower_bound`](Self::boundary_distance_lower_bound)
    /// but without the membership check; meaningless for outside points.
    pub(crate) fn distance_bound_unchecked(&self, z: Point) -> f64 {
        match self {
            Domain::Disc { center, radius } => radius - (z - *center).norm(),
            Domain::VerticalStrip { x_lo, x_hi } => (z.re - x_lo).min(x_hi - z.re),
            Domain::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => (z.re - x_lo)
                .min(x_hi - z.re)
                .min(z.im - y_lo)
                .min(y_hi - z.im),
            Domain::SimplePolygon { vertices } => polygon_edge_distance(vertices, z),
            Domain::EllipticAnnulus {
                c,
                alpha,
                gamma,
                beta,
            } => {
                // Homothetic level sets of a convex set: a point on the level
                // s of an ellipse with minor semi-axis b is at least |1 - s| b
                // away from the ellipse itself.
                let local = Point::new(z.re + c * gamma.cosh(), z.im);
                let s_outer = ellipse_level(local, *c, *beta).sqrt();
                let s_inner = ellipse_level(local, *c, *alpha).sqrt();
                let outer = (1.0 - s_outer) * c * beta.sinh();
                let inner = (s_inner - 1.0) * c * alpha.sinh();
                outer.min(inner)
            }
            Domain::Scaled { inner, lambda } => {
                lambda * inner.distance_bound_unchecked(z * (1.0 / lambda))
            }
            Domain::Translated { inner, shift } => inner.distance_bound_unchecked(z - *shift),
            Domain::ReflectedY { inner } => inner.distance_bound_unchecked(z.reflect_y()),
            Domain::Intersection { a, b } => a
                .distance_bound_unchecked(z)
                .min(b.distance_bound_unchecked(z)),
        }
    }

    /// Upper bound on `sup |z|` over the domain, `None` when unbounded.
    pub fn radius_bound(&self) -> Option<f64> {
        match self {
            Domain::Disc { center, radius } => Some(center.norm() + radius),
            Domain::VerticalStrip { .. } => None,
            Domain::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => Some(x_lo.abs().max(x_hi.abs()).hypot(y_lo.abs().max(y_hi.abs()))),
            Domain::SimplePolygon { vertices } => {
                vertices.iter().map(|v| v.norm()).reduce(f64::max)
            }
            Domain::EllipticAnnulus { c, gamma, beta, .. } => {
                Some(c * gamma.cosh() + c * beta.cosh())
            }
            Domain::Scaled { inner, lambda } => inner.radius_bound().map(|r| r * lambda),
            Domain::Translated { inner, shift } => inner.radius_bound().map(|r| r + shift.norm()),
            Domain::ReflectedY { inner } => inner.radius_bound(),
            Domain::Intersection { a, b } => match (a.radius_bound(), b.radius_bound()) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Upper bound on the half-width of the thinnest slab containing the
    /// domain. Finite for strips, which bounds their exit times even though
    /// they are unbounded.
    pub fn slab_half_width(&self) -> Option<f64> {
        match self {
            Domain::VerticalStrip { x_lo, x_hi } => Some(0.5 * (x_hi - x_lo)),
            Domain::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => Some(0.5 * (x_hi - x_lo).min(y_hi - y_lo)),
            Domain::Scaled { inner, lambda } => inner.slab_half_width().map(|w| w * lambda),
            Domain::Translated { inner, .. } | Domain::ReflectedY { inner } => {
                inner.slab_half_width()
            }
            Domain::Intersection { a, b } => match (a.slab_half_width(), b.slab_half_width()) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            },
            other => other.radius_bound(),
        }
    }
}

/// `x^2 / (c cosh eta)^2 + y^2 / (c sinh eta)^2` for the centred ellipse.
fn ellipse_level(p: Point, c: f64, eta: f64) -> f64 {
    let a = c * eta.cosh();
    let b = c * eta.sinh();
    (p.re / a).powi(2) + (p.im / b).powi(2)
}

fn validate_polygon(vertices: &[Point]) -> Result<()> {
    let bad = |msg: &str| Err(Error::InvalidDomain(msg.to_string()));
    let n = vertices.len();
    if n < 3 {
        return bad("polygon_vertices: need at least 3 vertices");
    }
    if vertices.iter().any(|v| !v.is_finite()) {
        return bad("polygon_finite: vertices must be finite");
    }
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        if a == b {
            return bad("polygon_simple: repeated consecutive vertex");
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return bad("polygon_simple: edges intersect");
            }
        }
    }
    let area2: f64 = (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum();
    if area2 == 0.0 {
        return bad("polygon_area: polygon is degenerate");
    }
    Ok(())
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Even-odd ray casting. Vertex hits are resolved by the half-open rule on
/// edge endpoints, points lying exactly on an edge are outside.
fn polygon_contains(vertices: &[Point], z: Point) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[j], vertices[i]);
        if orient(a, b, z) == 0.0 && on_segment(a, b, z) {
            return false;
        }
        if (b.im > z.im) != (a.im > z.im) {
            // Sign of the crossing test without dividing.
            let side = orient(a, b, z);
            let upward = b.im > a.im;
            if (side > 0.0) == upward {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn polygon_edge_distance(vertices: &[Point], z: Point) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let ab = b - a;
            let t = ((z - a).dot(ab) / ab.norm_sqr()).clamp(0.0, 1.0);
            (z - a.lerp(b, t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip() -> Domain {
        Domain::vertical_strip(-1.0, 2.0).unwrap()
    }

    #[test]
    fn contains_basic_cases() {
        assert!(Domain::unit_disc().contains(Point::ORIGIN));
        assert!(!strip().contains(Point::new(3.0, 0.0)));
        let inter = Domain::intersection(strip(), Domain::reflected_y(strip()).unwrap()).unwrap();
        // reflected strip is {-2 < x < 1}
        assert!(!inter.contains(Point::new(1.5, 0.0)));
        assert!(inter.contains(Point::new(0.5, 0.0)));
        assert!(!inter.contains(Point::new(-1.5, 0.0)));
    }

    #[test]
    fn boundary_is_outside() {
        assert!(!Domain::unit_disc().contains(Point::new(1.0, 0.0)));
        assert!(!strip().contains(Point::new(2.0, 5.0)));
        let sq = Domain::polygon(vec![
            Point::new(-1.0, -1.0),
            Point::new(1.0, -1.0),
            Point::new(1.0, 1.0),
            Point::new(-1.0, 1.0),
        ])
        .unwrap();
        assert!(!sq.contains(Point::new(1.0, 0.3)));
        assert!(!sq.contains(Point::new(1.0, 1.0)));
        assert!(sq.contains(Point::new(0.999, 0.999)));
    }

    #[test]
    fn polygon_vertex_ray_hits() {
        // The horizontal ray from (0, 0) passes exactly through the vertex (2, 0).
        let diamond = Domain::polygon(vec![
            Point::new(2.0, 0.0),
            Point::new(0.0, 2.0),
            Point::new(-2.0, 0.0),
            Point::new(0.0, -2.0),
        ])
        .unwrap();
        assert!(diamond.contains(Point::ORIGIN));
        assert!(diamond.contains(Point::new(1.0, 0.0)));
        assert!(!diamond.contains(Point::new(3.0, 0.0)));
        assert!(!diamond.contains(Point::new(-3.0, 0.0)));
        assert!(!diamond.contains(Point::new(0.0, 2.5)));
    }

    #[test]
    fn distance_bounds() {
        let d = Domain::unit_disc();
        assert_eq!(d.boundary_distance_lower_bound(Point::ORIGIN).unwrap(), 1.0);
        assert_eq!(strip().boundary_distance_lower_bound(Point::ORIGIN).unwrap(), 1.0);
        let big = Domain::scaled(Domain::unit_disc(), 3.0).unwrap();
        assert_eq!(big.boundary_distance_lower_bound(Point::ORIGIN).unwrap(), 3.0);
        assert!(matches!(
            d.boundary_distance_lower_bound(Point::new(2.0, 0.0)),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn validation() {
        let err = Domain::disc(Point::new(3.0, 0.0), 1.0).unwrap_err();
        assert!(err.to_string().contains("origin_inside"));
        assert!(Domain::vertical_strip(-1.0, 2.0).is_ok());
        assert!(Domain::vertical_strip(0.5, 2.0).is_err());
        assert!(Domain::elliptic_annulus(1.0, 0.4, 0.9, 1.3).is_ok());
        let err = Domain::elliptic_annulus(1.0, 0.9, 0.4, 1.3).unwrap_err();
        assert!(err.to_string().contains("annulus_order"));
        let bowtie = Domain::polygon(vec![
            Point::new(-0.5, -1.0),
            Point::new(1.5, 1.0),
            Point::new(1.5, -1.0),
            Point::new(-0.5, 1.0),
        ]);
        assert!(bowtie.unwrap_err().to_string().contains("polygon_simple"));
        assert!(Domain::scaled(Domain::unit_disc(), -1.0).is_err());
    }

    #[test]
    fn annulus_origin_on_middle_ellipse() {
        let (c, alpha, gamma, beta) = (1.0f64, 0.4f64, 0.9f64, 1.3f64);
        let ann = Domain::elliptic_annulus(c, alpha, gamma, beta).unwrap();
        // The shift puts the right vertex of E_gamma at the origin.
        let local = Point::new(c * gamma.cosh(), 0.0);
        assert!((ellipse_level(local, c, gamma) - 1.0).abs() < 1e-15);
        // Just inside the outer ellipse along the major axis, and inside the hole.
        let d = c * gamma.cosh();
        assert!(ann.contains(Point::new(c * beta.cosh() - d - 1e-9, 0.0)));
        assert!(!ann.contains(Point::new(c * beta.cosh() - d + 1e-9, 0.0)));
        assert!(!ann.contains(Point::new(-d, 0.0)));
        assert!(!ann.contains(Point::new(c * alpha.cosh() - d - 1e-9, 0.0)));
    }

    #[test]
    fn json_round_trip_and_field_names() {
        let d = Domain::intersection(
            Domain::translated(strip(), Point::new(0.25, 0.0)).unwrap(),
            Domain::reflected_y(Domain::rectangle(-1.0, 1.0, -2.0, 2.0).unwrap()).unwrap(),
        )
        .unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains(r#""type":"intersection""#));
        assert!(text.contains(r#""type":"strip""#));
        assert!(text.contains(r#""x_lo""#));
        assert_eq!(Domain::from_json(&text).unwrap(), d);

        let ann: Domain = Domain::from_json(
            r#"{"type":"elliptic_annulus","c":1,"alpha":0.4,"gamma":0.9,"beta":1.3}"#,
        )
        .unwrap();
        assert!(matches!(ann, Domain::EllipticAnnulus { .. }));
        assert!(Domain::from_json(r#"{"type":"disc","center":{"re":3,"im":0},"radius":1}"#).is_err());
    }
}
