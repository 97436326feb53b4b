use mf_backend::CropHint;
use mf_core::{BBoxF64, Grid, Keypoint, KeypointsF64, Mask, RgbImage, Skeleton};

use crate::spec::{ActorSpec, SceneSpec, Shape};

/// Background depth under the larger-is-nearer convention.
pub const BACKGROUND_DEPTH: f64 = 0.2;

/// Pixel sampling grid: the full frame, or a square crop window resampled to
/// `size`×`size`. Crop pixel `(u, v)` samples the frame point
/// `x0 + (u + 0.5)·side/size`, with `x0 = cx − side/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum View {
    Full,
    Crop(CropHint),
}

impl View {
    pub fn dims(&self, spec: &SceneSpec) -> (usize, usize) {
        match self {
            View::Full => (spec.width, spec.height),
            View::Crop(c) => (c.size, c.size),
        }
    }

    /// Frame point sampled by view pixel `(u, v)`.
    pub fn sample_point(&self, u: usize, v: usize) -> (f64, f64) {
        self.to_frame(u as f64 + 0.5, v as f64 + 0.5)
    }

    /// Continuous view coordinates to frame coordinates.
    pub fn to_frame(&self, u: f64, v: f64) -> (f64, f64) {
        match self {
            View::Full => (u, v),
            View::Crop(c) => {
                let k = c.side / c.size as f64;
                (c.cx - c.side / 2.0 + u * k, c.cy - c.side / 2.0 + v * k)
            }
        }
    }

    /// Frame coordinates to continuous view coordinates.
    pub fn from_frame(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            View::Full => (x, y),
            View::Crop(c) => {
                let k = c.size as f64 / c.side;
                ((x - (c.cx - c.side / 2.0)) * k, (y - (c.cy - c.side / 2.0)) * k)
            }
        }
    }

    /// View pixels whose sample points may fall in the frame-space box.
    fn pixel_range(&self, spec: &SceneSpec, b: [f64; 4]) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let (w, h) = self.dims(spec);
        let (u0, v0) = self.from_frame(b[0], b[1]);
        let (u1, v1) = self.from_frame(b[2], b[3]);
        let clamp = |a: f64, n: usize| (a.max(0.0) as usize).min(n);
        (
            clamp(u0.floor() - 1.0, w)..clamp(u1.ceil() + 1.0, w),
            clamp(v0.floor() - 1.0, h)..clamp(v1.ceil() + 1.0, h),
        )
    }
}

/// Position and scale of an actor on one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub cx: f64,
    pub cy: f64,
    pub scale: f64,
    pub frame: usize,
}

impl Pose {
    fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.cx) / self.scale, (y - self.cy) / self.scale)
    }

    fn to_world(&self, p: [f64; 2]) -> [f64; 2] {
        [self.cx + p[0] * self.scale, self.cy + p[1] * self.scale]
    }
}

/// Where a point lands after the actor moves from pose `a` to pose `b`.
pub fn carry(a: &Pose, b: &Pose, x: f64, y: f64) -> (f64, f64) {
    let (lx, ly) = a.to_local(x, y);
    let w = b.to_world([lx, ly]);
    (w[0], w[1])
}

#[derive(Debug, Clone, Copy)]
struct Capsule {
    a: [f64; 2],
    b: [f64; 2],
    r: f64,
}

impl Capsule {
    fn contains(&self, p: [f64; 2]) -> bool {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 {
            (((p[0] - self.a[0]) * d[0] + (p[1] - self.a[1]) * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [self.a[0] + t * d[0] - p[0], self.a[1] + t * d[1] - p[1]];
        q[0] * q[0] + q[1] * q[1] < self.r * self.r
    }
}

/// Local-frame geometry of a quadruped at one gait phase.
struct Body {
    parts: Vec<Capsule>,
    joints: [[f64; 2]; 17],
}

fn quadruped(body_length: f64, body_height: f64, leg_length: f64, leg_width: f64, phase: f64) -> Body {
    let r = body_height / 2.0;
    let a = ((body_length - body_height) / 2.0).max(0.0);
    let head = [a + 1.1 * r, -1.0 * r];
    let head_r = 0.65 * r;
    let neck = [a + 0.2 * r, -0.4 * r];
    let tail = [-a - 0.8 * r, -0.3 * r];
    let swing = 0.35 * phase.sin();
    let spread = 0.12 * body_length;
    let mut parts = vec![
        Capsule { a: [-a, 0.0], b: [a, 0.0], r },
        Capsule { a: neck, b: head, r: 0.45 * r },
        Capsule { a: head, b: head, r: head_r },
    ];
    let mut joints = [[0.0; 2]; 17];
    joints[0] = [head[0] + 0.15 * r, head[1] - 0.3 * r];
    joints[1] = [head[0] + 0.35 * r, head[1] - 0.2 * r];
    joints[2] = [head[0] + 0.6 * r, head[1] + 0.1 * r];
    joints[3] = neck;
    joints[4] = tail;
    // Shoulders and hips, each with a left and right leg swinging in antiphase.
    let roots = [
        ([0.75 * a + spread / 2.0, 0.3 * r], swing, 5),
        ([0.75 * a - spread / 2.0, 0.3 * r], -swing, 8),
        ([-0.75 * a + spread / 2.0, 0.3 * r], -swing, 11),
        ([-0.75 * a - spread / 2.0, 0.3 * r], swing, 14),
    ];
    for (root, angle, j) in roots {
        let paw = [root[0] + (r * 0.5 + leg_length) * angle.sin(), root[1] + (r * 0.5 + leg_length) * angle.cos()];
        let knee = [(root[0] + paw[0]) / 2.0, (root[1] + paw[1]) / 2.0];
        parts.push(Capsule {
            a: root,
            b: paw,
            r: leg_width / 2.0,
        });
        joints[j] = root;
        joints[j + 1] = knee;
        joints[j + 2] = paw;
    }
    Body { parts, joints }
}

/// Scene with analytic geometry. Every annotation is computed on demand for
/// one frame and one view.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
}

/// What is seen at a frame point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Background,
    Actor(usize),
    Occluder(usize),
}

impl Scene {
    pub fn new(spec: SceneSpec) -> Self {
        Self { spec }
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn actor_index(&self, id: u32) -> Option<usize> {
        self.spec.actors.iter().position(|a| a.id == id)
    }

    /// Pose of actor `idx` on `frame`, or `None` outside its visible range.
    pub fn pose(&self, idx: usize, frame: usize) -> Option<Pose> {
        let actor = &self.spec.actors[idx];
        if frame >= self.spec.frames {
            return None;
        }
        if let Some([s, e]) = actor.visible {
            if frame < s || frame >= e {
                return None;
            }
        }
        let kf = &actor.keyframes;
        let first = kf.first()?;
        let pick = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let (x, y, s) = match kf.iter().position(|k| k.frame > frame) {
            Some(0) => (first.x, first.y, first.scale),
            None => {
                let l = kf.last().unwrap();
                (l.x, l.y, l.scale)
            }
            Some(i) => {
                let (k0, k1) = (&kf[i - 1], &kf[i]);
                let t = (frame - k0.frame) as f64 / (k1.frame - k0.frame) as f64;
                (pick(k0.x, k1.x, t), pick(k0.y, k1.y, t), pick(k0.scale, k1.scale, t))
            }
        };
        Some(Pose {
            cx: x,
            cy: y,
            scale: s,
            frame,
        })
    }

    fn body(&self, actor: &ActorSpec, pose: &Pose) -> Option<Body> {
        match actor.shape {
            Shape::Ellipse { .. } => None,
            Shape::Quadruped {
                body_length,
                body_height,
                leg_length,
                leg_width,
                gait_period,
            } => {
                let phase = if gait_period > 0.0 {
                    std::f64::consts::TAU * pose.frame as f64 / gait_period
                } else {
                    0.0
                };
                Some(quadruped(body_length, body_height, leg_length, leg_width, phase))
            }
        }
    }

    /// Conservative frame-space extent of the actor.
    fn extent(&self, actor: &ActorSpec, pose: &Pose) -> [f64; 4] {
        let (hx, hy_top, hy_bottom) = match actor.shape {
            Shape::Ellipse { rx, ry } => (rx, ry, ry),
            Shape::Quadruped {
                body_length,
                body_height,
                leg_length,
                leg_width,
                ..
            } => {
                let reach = body_length / 2.0 + 1.5 * body_height + leg_length + leg_width;
                (reach, reach, reach)
            }
        };
        let s = pose.scale;
        [pose.cx - hx * s, pose.cy - hy_top * s, pose.cx + hx * s, pose.cy + hy_bottom * s]
    }

    fn silhouette(&self, actor: &ActorSpec, body: Option<&Body>, pose: &Pose, x: f64, y: f64) -> bool {
        let (lx, ly) = pose.to_local(x, y);
        match (&actor.shape, body) {
            (Shape::Ellipse { rx, ry }, _) => (lx / rx).powi(2) + (ly / ry).powi(2) < 1.0,
            (_, Some(b)) => b.parts.iter().any(|c| c.contains([lx, ly])),
            _ => false,
        }
    }

    fn in_canvas(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.spec.width as f64 && y < self.spec.height as f64
    }

    fn hidden_by_occluder(&self, depth: f64, x: f64, y: f64) -> bool {
        self.spec.occluders.iter().any(|o| {
            o.depth > depth && x >= o.rect[0] && x < o.rect[2] && y >= o.rect[1] && y < o.rect[3]
        })
    }

    /// Visible silhouette of actor `idx` sampled on `view`. Nearer occluders
    /// cut it; other actors do not.
    pub fn mask(&self, idx: usize, frame: usize, view: &View) -> Mask {
        let (w, h) = view.dims(&self.spec);
        let mut mask = Mask::empty(w, h);
        let Some(pose) = self.pose(idx, frame) else {
            return mask;
        };
        let actor = &self.spec.actors[idx];
        let body = self.body(actor, &pose);
        let (us, vs) = view.pixel_range(&self.spec, self.extent(actor, &pose));
        for v in vs {
            for u in us.clone() {
                let (x, y) = view.sample_point(u, v);
                if self.in_canvas(x, y)
                    && self.silhouette(actor, body.as_ref(), &pose, x, y)
                    && !self.hidden_by_occluder(actor.depth, x, y)
                {
                    mask.set(u, v, true);
                }
            }
        }
        mask
    }

    /// Pixel bounding box of the full-frame visible mask.
    pub fn bbox(&self, idx: usize, frame: usize) -> Option<BBoxF64> {
        self.mask(idx, frame, &View::Full).bbox()
    }

    pub fn keypoints(&self, idx: usize, frame: usize, view: &View) -> Option<KeypointsF64> {
        let pose = self.pose(idx, frame)?;
        let actor = &self.spec.actors[idx];
        let local: Vec<[f64; 2]> = match (&actor.shape, self.body(actor, &pose)) {
            (Shape::Ellipse { rx, ry }, _) => (0..17)
                .map(|j| {
                    let t = std::f64::consts::TAU * j as f64 / 17.0;
                    let r = if j % 2 == 0 { 0.7 } else { 0.4 };
                    [r * rx * t.cos(), r * ry * t.sin()]
                })
                .collect(),
            (_, Some(b)) => b.joints.to_vec(),
            _ => unreachable!(),
        };
        let points = local
            .into_iter()
            .map(|p| {
                let [x, y] = pose.to_world(p);
                let conf = if self.in_canvas(x, y) { 1.0 } else { 0.0 };
                let (u, v) = view.from_frame(x, y);
                Keypoint::new(u, v, conf)
            })
            .collect();
        Some(KeypointsF64::new(points))
    }

    pub fn skeleton(&self) -> Skeleton {
        Skeleton::quadruped17()
    }

    /// Nearest surface at a frame point.
    pub fn surface(&self, frame: usize, x: f64, y: f64) -> (Surface, f64) {
        let mut best = (Surface::Background, BACKGROUND_DEPTH);
        for (i, o) in self.spec.occluders.iter().enumerate() {
            if o.depth > best.1 && x >= o.rect[0] && x < o.rect[2] && y >= o.rect[1] && y < o.rect[3] {
                best = (Surface::Occluder(i), o.depth);
            }
        }
        for (i, a) in self.spec.actors.iter().enumerate() {
            if a.depth <= best.1 {
                continue;
            }
            if let Some(pose) = self.pose(i, frame) {
                let e = self.extent(a, &pose);
                if x < e[0] || x > e[2] || y < e[1] || y > e[3] {
                    continue;
                }
                if self.silhouette(a, self.body(a, &pose).as_ref(), &pose, x, y) {
                    best = (Surface::Actor(i), a.depth);
                }
            }
        }
        best
    }

    /// Per-frame surfaces on `view`, computing each actor's body once.
    fn surfaces(&self, frame: usize, view: &View) -> Vec<(Surface, f64)> {
        let (w, h) = view.dims(&self.spec);
        let mut out = Vec::with_capacity(w * h);
        for v in 0..h {
            for u in 0..w {
                let (x, y) = view.sample_point(u, v);
                if self.in_canvas(x, y) {
                    out.push((Surface::Background, BACKGROUND_DEPTH));
                } else {
                    out.push((Surface::Background, 0.0));
                }
            }
        }
        for (i, o) in self.spec.occluders.iter().enumerate() {
            let (us, vs) = view.pixel_range(&self.spec, o.rect);
            for v in vs {
                for u in us.clone() {
                    let (x, y) = view.sample_point(u, v);
                    let cell = &mut out[v * w + u];
                    if self.in_canvas(x, y)
                        && o.depth > cell.1
                        && x >= o.rect[0]
                        && x < o.rect[2]
                        && y >= o.rect[1]
                        && y < o.rect[3]
                    {
                        *cell = (Surface::Occluder(i), o.depth);
                    }
                }
            }
        }
        for (i, a) in self.spec.actors.iter().enumerate() {
            let Some(pose) = self.pose(i, frame) else { continue };
            let body = self.body(a, &pose);
            let (us, vs) = view.pixel_range(&self.spec, self.extent(a, &pose));
            for v in vs {
                for u in us.clone() {
                    let (x, y) = view.sample_point(u, v);
                    let cell = &mut out[v * w + u];
                    if self.in_canvas(x, y) && a.depth > cell.1 && self.silhouette(a, body.as_ref(), &pose, x, y) {
                        *cell = (Surface::Actor(i), a.depth);
                    }
                }
            }
        }
        out
    }

    /// Depth of the nearest surface; zero outside the canvas.
    pub fn depth(&self, frame: usize, view: &View) -> Grid<f32> {
        let (w, h) = view.dims(&self.spec);
        let s = self.surfaces(frame, view);
        Grid::from_values(w, h, 1, s.iter().map(|c| c.1 as f32).collect()).expect("depth grid size")
    }

    /// Motion of each `view0` pixel of frame `f0` to its position in `view1`
    /// on frame `f1`, in `view1` pixels. Background and occluders are static.
    pub fn flow(&self, f0: usize, view0: &View, f1: usize, view1: &View) -> Grid<f32> {
        let (w, h) = view0.dims(&self.spec);
        let s = self.surfaces(f0, view0);
        let mut values = Vec::with_capacity(w * h * 2);
        for v in 0..h {
            for u in 0..w {
                let (x, y) = view0.sample_point(u, v);
                let (x1, y1) = match s[v * w + u].0 {
                    Surface::Actor(i) => match (self.pose(i, f0), self.pose(i, f1)) {
                        (Some(a), Some(b)) => carry(&a, &b, x, y),
                        _ => (x, y),
                    },
                    _ => (x, y),
                };
                let (u1, v1) = view1.from_frame(x1, y1);
                values.push((u1 - (u as f64 + 0.5)) as f32);
                values.push((v1 - (v as f64 + 0.5)) as f32);
            }
        }
        Grid::from_values(w, h, 2, values).expect("flow grid size")
    }

    /// Background colour at `frame` before grain.
    pub fn background(&self, frame: usize) -> [f64; 3] {
        let segs = &self.spec.background;
        let i = segs.iter().rposition(|s| s.start <= frame).unwrap_or(0);
        let seg = &segs[i];
        let base = seg.color.map(f64::from);
        match seg.fade_to {
            None => base,
            Some(to) => {
                let end = segs.get(i + 1).map_or(self.spec.frames, |s| s.start);
                let t = (frame - seg.start) as f64 / (end - seg.start).max(1) as f64;
                [0, 1, 2].map(|c| base[c] + (to[c] as f64 - base[c]) * t)
            }
        }
    }

    /// Frames starting a new shot: segment starts whose colour jumps.
    pub fn cuts(&self) -> Vec<usize> {
        let segs = &self.spec.background;
        segs.windows(2)
            .filter(|w| w[0].fade_to.unwrap_or(w[0].color) != w[1].color)
            .map(|w| w[1].start)
            .filter(|&s| s > 0 && s < self.spec.frames)
            .collect()
    }

    /// Per-channel grain offsets in `[-grain, grain]` for a frame pixel.
    fn grain(&self, frame: usize, x: usize, y: usize) -> [i32; 3] {
        let g = self.spec.grain as u64;
        if g == 0 {
            return [0; 3];
        }
        let h = crate::mix64(self.spec.seed ^ ((frame as u64) << 40) ^ ((y as u64) << 20) ^ x as u64);
        [0, 1, 2].map(|c| (((h >> (21 * c)) & 0x1f_ffff) % (2 * g + 1)) as i32 - g as i32)
    }

    pub fn render(&self, frame: usize, view: &View) -> RgbImage {
        let (w, h) = view.dims(&self.spec);
        let round = |c: [f64; 3]| c.map(|v| v.round() as i32);
        let bg = round(self.background(frame));
        let actors: Vec<_> = self.spec.actors.iter().map(|a| a.color.map(i32::from)).collect();
        let occluders: Vec<_> = self.spec.occluders.iter().map(|o| o.color.map(i32::from)).collect();
        let s = self.surfaces(frame, view);
        let mut img = RgbImage::new(w, h);
        for v in 0..h {
            for u in 0..w {
                let (x, y) = view.sample_point(u, v);
                if !self.in_canvas(x, y) {
                    continue;
                }
                let base = match s[v * w + u].0 {
                    Surface::Background => bg,
                    Surface::Actor(i) => actors[i],
                    Surface::Occluder(i) => occluders[i],
                };
                let g = self.grain(frame, x as usize, y as usize);
                img.put(u, v, [0, 1, 2].map(|c| (base[c] + g[c]).clamp(0, 255) as u8));
            }
        }
        img
    }

    /// Actor whose bbox centre is nearest the crop centre among those present.
    pub fn actor_at_view_center(&self, frame: usize, view: &View) -> Option<usize> {
        let (w, h) = view.dims(&self.spec);
        let (cx, cy) = view.to_frame(w as f64 / 2.0, h as f64 / 2.0);
        (0..self.spec.actors.len())
            .filter_map(|i| {
                let b = self.bbox(i, frame)?;
                let (bx, by) = b.center();
                Some((i, (bx - cx).hypot(by - cy)))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }
}
