//! Physical model: ULA steering vectors, clustered multi-path users, and
//! partially observed noisy uplink snapshots.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, frob, CMat, CVec, ZERO};
use crate::serde_cx;


/// Uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_antennas: usize,
    /// Element spacing in wavelengths.
    pub delta_r: f64,
}

impl ArrayGeometry {
    pub fn new(n_antennas: usize, delta_r: f64) -> Result<Self> {
        if n_antennas < 2 {
            return Err(Error::InvalidConfig(format!("n_antennas = {n_antennas} < 2")));
        }
        if !(delta_r > 0.0) {
            return Err(Error::InvalidConfig(format!("delta_r = {delta_r} must be > 0")));
        }
        Ok(Self { n_antennas, delta_r })
    }

    /// Half-wavelength array.
    pub fn half_wavelength(n_antennas: usize) -> Result<Self> {
        Self::new(n_antennas, 0.5)
    }

    /// Spatial frequency `delta_r * cos(theta)` of a direction.
    pub fn spatial_frequency(&self, theta: f64) -> f64 {
        self.delta_r * theta.cos()
    }

    /// Steering vector for a direction.
    ///
    /// Entry `n` is `exp(-j 2 pi delta_r n cos(theta)) / sqrt(N)`.
    pub fn steering_vector(&self, theta: f64) -> Result<CVec> {
        if !(theta > 0.0 && theta < PI) {
            return Err(Error::AngleOutOfRange(theta));
        }
        Ok(self.steering_at_frequency(self.spatial_frequency(theta)))
    }

    /// Steering vector parameterized directly by spatial frequency.
    pub fn steering_at_frequency(&self, f: f64) -> CVec {
        let n = self.n_antennas;
        let scale = 1.0 / (n as f64).sqrt();
        CVec::from_fn(n, |i, _| {
            let phase = -2.0 * PI * f * i as f64;
            c(scale * phase.cos(), scale * phase.sin())
        })
    }

    /// Columns are the steering vectors of `angles`.
    pub fn steering_matrix(&self, angles: &[f64]) -> Result<CMat> {
        let cols = angles
            .iter()
            .map(|&t| self.steering_vector(t))
            .collect::<Result<Vec<_>>>()?;
        if cols.is_empty() {
            return Ok(CMat::zeros(self.n_antennas, 0));
        }
        Ok(CMat::from_columns(&cols))
    }
}

/// Free-function form of [`ArrayGeometry::steering_vector`].
pub fn steering_vector(theta: f64, geometry: &ArrayGeometry) -> Result<CVec> {
    geometry.steering_vector(theta)
}

/// Multi-path channel of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserChannel {
    /// Angles of arrival in radians, each in (0, pi).
    pub angles: Vec<f64>,
    pub gains: Vec<num_complex::Complex64>,
}

impl UserChannel {
    pub fn n_paths(&self) -> usize {
        self.angles.len()
    }

    /// `h = A(theta) alpha` over all antennas.
    pub fn channel(&self, geometry: &ArrayGeometry) -> Result<CVec> {
        let a = geometry.steering_matrix(&self.angles)?;
        Ok(a * CVec::from_column_slice(&self.gains))
    }
}

/// Ground-truth world for one coherence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub geometry: ArrayGeometry,
    pub users: Vec<UserChannel>,
    /// Zero-based, ascending indices of active users.
    pub active_set: Vec<usize>,
    /// Transmitted data of each active user, aligned with `active_set`.
    #[serde(with = "serde_cx::vecs")]
    pub data: Vec<CVec>,
    pub snapshots: usize,
}

impl Scene {
    pub fn n_active(&self) -> usize {
        self.active_set.len()
    }

    pub fn active_users(&self) -> impl Iterator<Item = (&UserChannel, &CVec)> {
        self.active_set.iter().map(|&k| &self.users[k]).zip(self.data.iter())
    }

    /// Noise-free received signal `X = sum_k h_k s_k^H` over all antennas.
    pub fn signal(&self) -> Result<CMat> {
        let mut x = CMat::zeros(self.geometry.n_antennas, self.snapshots);
        for (user, s) in self.active_users() {
            let h = user.channel(&self.geometry)?;
            x += h * s.adjoint();
        }
        Ok(x)
    }

    fn validate(&self) -> Result<()> {
        if self.data.len() != self.active_set.len() {
            return Err(Error::Dimension("one data vector per active user".into()));
        }
        for &k in &self.active_set {
            if k >= self.users.len() {
                return Err(Error::Dimension(format!("active index {k} out of range")));
            }
        }
        for s in &self.data {
            if s.len() != self.snapshots {
                return Err(Error::Dimension("data length != snapshots".into()));
            }
        }
        for u in &self.users {
            if u.angles.len() != u.gains.len() || u.angles.is_empty() {
                return Err(Error::Dimension("angles and gains must be nonempty and equal length".into()));
            }
            if let Some(&t) = u.angles.iter().find(|&&t| !(t > 0.0 && t < PI)) {
                return Err(Error::AngleOutOfRange(t));
            }
        }
        Ok(())
    }
}

/// Partial, noisy measurement of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// `M x T` measurements on the observed antennas.
    #[serde(with = "serde_cx::mat")]
    pub y_omega: CMat,
    /// Observed antenna indices (zero-based, ascending).
    pub omega: Vec<usize>,
    pub sigma: f64,
    /// Noise-ball radius used by the recovery stage.
    pub eta: f64,
    #[serde(with = "serde_cx::mat")]
    pub noise: CMat,
}

impl Observation {
    pub fn n_observed(&self) -> usize {
        self.omega.len()
    }

    pub fn snapshots(&self) -> usize {
        self.y_omega.ncols()
    }
}

/// Simulation knobs for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub n_antennas: usize,
    pub delta_r: f64,
    /// `M`, number of observed antennas.
    pub n_observed: usize,
    /// `K`
    pub n_users: usize,
    /// `K_a`
    pub n_active: usize,
    /// `T`
    pub snapshots: usize,
    pub l_min: usize,
    pub l_max: usize,
    /// Half-width of each user's cluster. This and the two separations are
    /// measured in direction cosine `cos(theta)`, which matches radians at
    /// broadside.
    pub angular_spread: f64,
    /// Minimum separation between active cluster centers.
    pub min_center_separation: f64,
    /// Minimum separation between paths of the same user.
    pub min_path_separation: f64,
    /// Every path is kept at least this far (radians) from the array endfire.
    pub edge_margin: f64,
    /// `+inf` means noiseless.
    #[serde(with = "serde_cx::extended_f64")]
    pub snr_db: f64,
    pub rng_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self::for_array(64)
    }
}

impl SceneConfig {
    /// Defaults scaled to an `n`-element half-wavelength array.
    ///
    /// Separations are expressed in multiples of the array's resolution
    /// cell `1 / (N delta_r)` in direction-cosine units, read as radians.
    pub fn for_array(n: usize) -> Self {
        let delta_r = 0.5;
        let cell = 1.0 / (n as f64 * delta_r);
        let min_path_separation = 1.5 * cell;
        // room for three paths at the minimum separation, with slack
        let angular_spread = 1.5 * min_path_separation;
        Self {
            n_antennas: n,
            delta_r,
            n_observed: n,
            n_users: 10,
            n_active: 3,
            snapshots: 2,
            l_min: 1,
            l_max: 3,
            angular_spread,
            min_center_separation: (4.0 * cell).max(2.0 * angular_spread + 2.0 * cell),
            min_path_separation,
            edge_margin: PI / 6.0,
            snr_db: f64::INFINITY,
            rng_seed: 0,
        }
    }

    /// Largest `|cos(theta)|` of a cluster center; the whole cluster then
    /// stays within the edge margin.
    pub fn center_cosine_limit(&self) -> f64 {
        self.edge_margin.cos() - self.angular_spread
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.n_antennas, self.delta_r)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        self.geometry()?;
        if self.n_active == 0 || self.n_active > self.n_users {
            return bad(format!("need 1 <= n_active ({}) <= n_users ({})", self.n_active, self.n_users));
        }
        if self.n_observed == 0 || self.n_observed > self.n_antennas {
            return bad(format!(
                "need 1 <= n_observed ({}) <= n_antennas ({})",
                self.n_observed, self.n_antennas
            ));
        }
        if self.snapshots == 0 {
            return bad("snapshots must be >= 1".into());
        }
        if self.l_min == 0 || self.l_min > self.l_max {
            return bad(format!("need 1 <= l_min ({}) <= l_max ({})", self.l_min, self.l_max));
        }
        if !(self.angular_spread >= 0.0) {
            return bad("angular_spread must be >= 0".into());
        }
        if !(self.min_center_separation > 2.0 * self.angular_spread) {
            return bad(format!(
                "min_center_separation ({}) must exceed twice the angular spread ({})",
                self.min_center_separation, self.angular_spread
            ));
        }
        if !(self.min_path_separation >= 0.0) || !(self.edge_margin >= 0.0) {
            return bad("separations and margins must be >= 0".into());
        }
        if self.l_max > 1 && (self.l_max - 1) as f64 * self.min_path_separation > 2.0 * self.angular_spread + 1e-12 {
            return bad(format!(
                "{} paths at separation {} do not fit in a cluster of half-width {}",
                self.l_max, self.min_path_separation, self.angular_spread
            ));
        }
        if self.edge_margin >= PI / 2.0 || self.angular_spread >= self.edge_margin.cos() {
            return bad("edge_margin and angular_spread leave no room for cluster centers".into());
        }
        if self.snr_db.is_nan() {
            return bad("snr_db is NaN".into());
        }
        Ok(())
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, std: f64) -> num_complex::Complex64 {
    let s = std / std::f64::consts::SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(s * re, s * im)
}

/// Uniform on (0, 1].
pub(crate) fn unit_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// `count` points uniform on `[lo, hi]` conditioned on pairwise gaps of at
/// least `gap`, in ascending order. Sorted uniforms on the shortened interval
/// `[lo, hi - (count - 1) gap]`, shifted apart by `gap`, have exactly that law.
fn spaced_uniform<R: Rng + ?Sized>(rng: &mut R, count: usize, lo: f64, hi: f64, gap: f64) -> Option<Vec<f64>> {
    if count == 0 {
        return Some(Vec::new());
    }
    let slack = hi - lo - (count - 1) as f64 * gap;
    if slack < 0.0 {
        return None;
    }
    let mut pts: Vec<f64> = (0..count).map(|_| lo + slack * rng.random::<f64>()).collect();
    pts.sort_by(f64::total_cmp);
    for (i, p) in pts.iter_mut().enumerate() {
        *p += i as f64 * gap;
    }
    Some(pts)
}

/// Direction cosines of the active cluster centers, in random order.
fn draw_centers<R: Rng + ?Sized>(config: &SceneConfig, rng: &mut R, count: usize) -> Result<Vec<f64>> {
    let u_max = config.center_cosine_limit();
    let mut centers = spaced_uniform(rng, count, -u_max, u_max, config.min_center_separation).ok_or_else(|| {
        Error::Infeasible(format!(
            "{count} cluster centers {} apart do not fit in cos(theta) within +/-{u_max:.4}",
            config.min_center_separation
        ))
    })?;
    centers.shuffle(rng);
    Ok(centers)
}

/// Ascending path angles around the center with direction cosine `u0`.
fn draw_paths<R: Rng + ?Sized>(config: &SceneConfig, rng: &mut R, u0: f64, n_paths: usize) -> Result<Vec<f64>> {
    let spread = config.angular_spread;
    let us = spaced_uniform(rng, n_paths, u0 - spread, u0 + spread, config.min_path_separation).ok_or_else(|| {
        Error::Infeasible(format!(
            "{n_paths} paths {} apart do not fit within +/-{spread}",
            config.min_path_separation
        ))
    })?;
    // acos is decreasing, so reverse to keep angles ascending
    Ok(us.into_iter().rev().map(f64::acos).collect())
}

/// Draws a random clustered scene.
///
/// Cluster centers are uniform in direction cosine. Active users' centers
/// are conditioned on the minimum separation; inactive users get
/// unconstrained centers (they carry no data and never reach the receiver).
pub fn generate_scene<R: Rng + ?Sized>(config: &SceneConfig, rng: &mut R) -> Result<Scene> {
    config.validate()?;
    let geometry = config.geometry()?;
    let mut active_set = rand::seq::index::sample(rng, config.n_users, config.n_active).into_vec();
    active_set.sort_unstable();

    let active_centers = draw_centers(config, rng, config.n_active)?;
    let u_max = config.center_cosine_limit();
    let mut users = Vec::with_capacity(config.n_users);
    let mut next_active = 0usize;
    for k in 0..config.n_users {
        let center = if active_set.binary_search(&k).is_ok() {
            next_active += 1;
            active_centers[next_active - 1]
        } else {
            rng.random_range(-u_max..=u_max)
        };
        let n_paths = rng.random_range(config.l_min..=config.l_max);
        let angles = draw_paths(config, rng, center, n_paths)?;
        let gains = (0..n_paths).map(|_| complex_gaussian(rng, 1.0)).collect();
        users.push(UserChannel { angles, gains });
    }

    let data = (0..config.n_active)
        .map(|_| {
            let s = CVec::from_fn(config.snapshots, |_, _| c(unit_open_closed(rng), 0.0));
            let norm = s.norm();
            s.unscale(norm)
        })
        .collect();

    let scene = Scene {
        geometry,
        users,
        active_set,
        data,
        snapshots: config.snapshots,
    };
    scene.validate()?;
    Ok(scene)
}

/// Row-sampling operator: keeps the rows listed in `omega`.
pub fn restrict_rows(x: &CMat, omega: &[usize]) -> CMat {
    CMat::from_fn(omega.len(), x.ncols(), |i, j| x[(omega[i], j)])
}

/// Noise standard deviation that realizes `snr_db` for a given noiseless observation.
pub fn noise_sigma(signal_omega: &CMat, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    let entries = (signal_omega.nrows() * signal_omega.ncols()) as f64;
    let power = frob(signal_omega).powi(2) / entries;
    (power / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Samples the observed antennas and adds white complex Gaussian noise.
pub fn synthesize<R: Rng + ?Sized>(scene: &Scene, config: &SceneConfig, rng: &mut R) -> Result<Observation> {
    scene.validate()?;
    let n = scene.geometry.n_antennas;
    if config.n_observed == 0 || config.n_observed > n {
        return Err(Error::InvalidConfig(format!("n_observed {} not in 1..={n}", config.n_observed)));
    }
    let x = scene.signal()?;
    let mut omega = rand::seq::index::sample(rng, n, config.n_observed).into_vec();
    omega.sort_unstable();
    let x_omega = restrict_rows(&x, &omega);

    let sigma = noise_sigma(&x_omega, config.snr_db);
    let noise = if sigma > 0.0 {
        CMat::from_fn(x_omega.nrows(), x_omega.ncols(), |_, _| complex_gaussian(rng, sigma))
    } else {
        CMat::from_element(x_omega.nrows(), x_omega.ncols(), ZERO)
    };
    let eta = frob(&noise);
    Ok(Observation {
        y_omega: x_omega + &noise,
        omega,
        sigma,
        eta,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geo(n: usize) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(n).unwrap()
    }

    #[test]
    fn broadside_steering_is_flat() {
        let a = geo(4).steering_vector(PI / 2.0).unwrap();
        for z in a.iter() {
            assert!((z - c(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn sixty_degree_steering_quarter_turns() {
        let a = geo(4).steering_vector(PI / 3.0).unwrap();
        let want = [c(0.5, 0.0), c(0.0, -0.5), c(-0.5, 0.0), c(0.0, 0.5)];
        for (z, w) in a.iter().zip(want) {
            assert!((z - w).norm() < 1e-12, "{z} vs {w}");
        }
    }

    #[test]
    fn steering_has_flat_modulus() {
        let a = geo(64).steering_vector(1.234).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!(a.iter().all(|z| (z.norm() - 0.125).abs() < 1e-12));
    }

    #[test]
    fn steering_rejects_out_of_range() {
        for t in [0.0, PI, -0.1, 4.0, f64::NAN] {
            assert!(matches!(geo(8).steering_vector(t), Err(Error::AngleOutOfRange(_))));
        }
    }

    #[test]
    fn zero_spread_collapses_clusters() {
        let cfg = SceneConfig {
            n_users: 10,
            n_active: 3,
            angular_spread: 0.0,
            min_path_separation: 0.0,
            ..SceneConfig::for_array(32)
        };
        let scene = generate_scene(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for (u, _) in scene.active_users() {
            assert!(u.angles.iter().all(|&t| t == u.angles[0]));
        }
    }

    #[test]
    fn all_users_active() {
        let cfg = SceneConfig {
            n_users: 3,
            n_active: 3,
            ..SceneConfig::for_array(32)
        };
        let scene = generate_scene(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(scene.active_set, vec![0, 1, 2]);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SceneConfig::for_array(32);
        let a = generate_scene(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = generate_scene(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_scene_respects_constraints() {
        let cfg = SceneConfig::for_array(48);
        for seed in 0..20 {
            let scene = generate_scene(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let mut clusters: Vec<Vec<f64>> = Vec::new();
            for (u, s) in scene.active_users() {
                assert!((s.norm() - 1.0).abs() < 1e-12);
                assert!(s.iter().all(|z| z.re > 0.0 && z.im == 0.0));
                assert!((1..=cfg.l_max).contains(&u.n_paths()));
                let us: Vec<f64> = u.angles.iter().map(|t| t.cos()).collect();
                for w in us.windows(2) {
                    assert!((w[1] - w[0]).abs() >= cfg.min_path_separation - 1e-12);
                }
                let spanned = us.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - us.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(spanned <= 2.0 * cfg.angular_spread + 1e-12);
                clusters.push(us);
            }
            let gap = cfg.min_center_separation - 2.0 * cfg.angular_spread;
            for i in 0..clusters.len() {
                for j in 0..i {
                    for a in &clusters[i] {
                        for b in &clusters[j] {
                            assert!((a - b).abs() >= gap - 1e-12);
                        }
                    }
                }
            }
            assert_eq!(scene.active_set.len(), cfg.n_active);
            assert_eq!(scene.users.len(), cfg.n_users);
        }
    }

    #[test]
    fn impossible_separation_is_reported() {
        let cfg = SceneConfig {
            n_users: 20,
            n_active: 20,
            min_center_separation: 0.5,
            ..SceneConfig::for_array(32)
        };
        let err = generate_scene(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = SceneConfig::for_array(16);
        let cases = [
            SceneConfig { n_active: 11, ..base.clone() },
            SceneConfig { n_observed: 17, ..base.clone() },
            SceneConfig { l_max: 0, l_min: 0, ..base.clone() },
            SceneConfig { min_center_separation: 2.0 * base.angular_spread, ..base.clone() },
            SceneConfig { n_antennas: 1, n_observed: 1, ..base.clone() },
        ];
        for cfg in cases {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn noiseless_full_observation_reproduces_model() {
        let cfg = SceneConfig::for_array(32);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scene = generate_scene(&cfg, &mut rng).unwrap();
        let obs = synthesize(&scene, &cfg, &mut rng).unwrap();
        assert_eq!(obs.omega, (0..32).collect::<Vec<_>>());
        assert_eq!(obs.eta, 0.0);
        assert_eq!(obs.sigma, 0.0);
        // entrywise sum of A_k alpha_k s_k^H
        for n in 0..32 {
            for t in 0..cfg.snapshots {
                let mut acc = ZERO;
                for (u, s) in scene.active_users() {
                    for (&th, &g) in u.angles.iter().zip(&u.gains) {
                        let a = scene.geometry.steering_vector(th).unwrap();
                        acc += a[n] * g * s[t].conj();
                    }
                }
                assert!((obs.y_omega[(n, t)] - acc).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn single_atom_observation_is_rank_one() {
        let cfg = SceneConfig {
            n_users: 1,
            n_active: 1,
            l_max: 1,
            snapshots: 4,
            ..SceneConfig::for_array(16)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scene = generate_scene(&cfg, &mut rng).unwrap();
        let obs = synthesize(&scene, &cfg, &mut rng).unwrap();
        let sv = obs.y_omega.clone().singular_values();
        assert!(sv[0] > 0.1);
        assert!(sv.iter().skip(1).all(|&s| s < 1e-12 * sv[0]));
    }

    #[test]
    fn partial_observation_rows_ascending() {
        let cfg = SceneConfig {
            n_observed: 10,
            snr_db: 10.0,
            ..SceneConfig::for_array(32)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let scene = generate_scene(&cfg, &mut rng).unwrap();
        let obs = synthesize(&scene, &cfg, &mut rng).unwrap();
        assert_eq!(obs.y_omega.nrows(), 10);
        assert!(obs.omega.windows(2).all(|w| w[0] < w[1]));
        assert!((obs.eta - frob(&obs.noise)).abs() < 1e-15);
        let x = restrict_rows(&scene.signal().unwrap(), &obs.omega);
        assert!(frob(&(obs.y_omega.clone() - x - &obs.noise)) < 1e-12);
    }
}
