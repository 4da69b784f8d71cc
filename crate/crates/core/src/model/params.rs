use rand::RngCore;

use super::config::ModelConfig;
use crate::ndcore::{Scalar, Tensor};
use crate::rng::{stream, uniform};

#[derive(Clone, Debug, PartialEq)]
pub struct SageParams<P> {
    pub w_self: P,
    pub w_neigh: P,
    pub bias: P,
}

/// One LSTM direction. Gate blocks are ordered input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<P> {
    pub w_ih: P,
    pub w_hh: P,
    pub bias: P,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiLstmParams<P> {
    pub forward: LstmParams<P>,
    pub backward: LstmParams<P>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams<P> {
    pub w: P,
    pub b: P,
}

/// Every trainable tensor, or anything else indexed the same way.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<P> {
    pub projection: Option<P>,
    pub sage1: Option<SageParams<P>>,
    pub sage2: Option<SageParams<P>>,
    pub bilstm: Option<BiLstmParams<P>>,
    pub head: HeadParams<P>,
}

pub type Params<T> = ModelParams<Tensor<T>>;

impl<P> ModelParams<P> {
    /// Visits entries in a fixed order with stable names.
    pub fn visit<'s>(&'s self, mut f: impl FnMut(&str, &'s P)) {
        if let Some(p) = &self.projection {
            f("projection", p);
        }
        for (name, s) in [("sage1", &self.sage1), ("sage2", &self.sage2)] {
            if let Some(s) = s {
                f(&format!("{name}.w_self"), &s.w_self);
                f(&format!("{name}.w_neigh"), &s.w_neigh);
                f(&format!("{name}.bias"), &s.bias);
            }
        }
        if let Some(b) = &self.bilstm {
            for (dir, l) in [("forward", &b.forward), ("backward", &b.backward)] {
                f(&format!("bilstm.{dir}.w_ih"), &l.w_ih);
                f(&format!("bilstm.{dir}.w_hh"), &l.w_hh);
                f(&format!("bilstm.{dir}.bias"), &l.bias);
            }
        }
        f("head.w", &self.head.w);
        f("head.b", &self.head.b);
    }

    pub fn visit_mut(&mut self, mut f: impl FnMut(&str, &mut P)) {
        if let Some(p) = &mut self.projection {
            f("projection", p);
        }
        for (name, s) in [("sage1", &mut self.sage1), ("sage2", &mut self.sage2)] {
            if let Some(s) = s {
                f(&format!("{name}.w_self"), &mut s.w_self);
                f(&format!("{name}.w_neigh"), &mut s.w_neigh);
                f(&format!("{name}.bias"), &mut s.bias);
            }
        }
        if let Some(b) = &mut self.bilstm {
            for (dir, l) in [("forward", &mut b.forward), ("backward", &mut b.backward)] {
                f(&format!("bilstm.{dir}.w_ih"), &mut l.w_ih);
                f(&format!("bilstm.{dir}.w_hh"), &mut l.w_hh);
                f(&format!("bilstm.{dir}.bias"), &mut l.bias);
            }
        }
        f("head.w", &mut self.head.w);
        f("head.b", &mut self.head.b);
    }

    pub fn map<'s, Q>(&'s self, mut f: impl FnMut(&str, &'s P) -> Q) -> ModelParams<Q> {
        fn sage<'s, P, Q>(
            name: &str,
            s: &'s SageParams<P>,
            f: &mut impl FnMut(&str, &'s P) -> Q,
        ) -> SageParams<Q> {
            SageParams {
                w_self: f(&format!("{name}.w_self"), &s.w_self),
                w_neigh: f(&format!("{name}.w_neigh"), &s.w_neigh),
                bias: f(&format!("{name}.bias"), &s.bias),
            }
        }
        fn lstm<'s, P, Q>(
            name: &str,
            l: &'s LstmParams<P>,
            f: &mut impl FnMut(&str, &'s P) -> Q,
        ) -> LstmParams<Q> {
            LstmParams {
                w_ih: f(&format!("bilstm.{name}.w_ih"), &l.w_ih),
                w_hh: f(&format!("bilstm.{name}.w_hh"), &l.w_hh),
                bias: f(&format!("bilstm.{name}.bias"), &l.bias),
            }
        }
        let projection = self.projection.as_ref().map(|p| f("projection", p));
        let sage1 = self.sage1.as_ref().map(|s| sage("sage1", s, &mut f));
        let sage2 = self.sage2.as_ref().map(|s| sage("sage2", s, &mut f));
        let bilstm = self.bilstm.as_ref().map(|b| BiLstmParams {
            forward: lstm("forward", &b.forward, &mut f),
            backward: lstm("backward", &b.backward, &mut f),
        });
        let head = HeadParams {
            w: f("head.w", &self.head.w),
            b: f("head.b", &self.head.b),
        };
        ModelParams {
            projection,
            sage1,
            sage2,
            bilstm,
            head,
        }
    }

    pub fn len(&self) -> usize {
        let mut n = 0;
        self.visit(|_, _| n += 1);
        n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit(|n, _| names.push(n.to_owned()));
        names
    }
}

fn uniform_tensor<T: Scalar>(rows: usize, cols: usize, bound: f64, rng: &mut impl RngCore) -> Tensor<T> {
    let data = (0..rows * cols).map(|_| T::from_f64(uniform(rng, -bound, bound))).collect();
    Tensor::new(vec![rows, cols], data).expect("length computed from shape")
}

impl<T: Scalar> Params<T> {
    /// Fresh parameters: weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
    /// biases zero, projection identity. Each tensor draws from its own named
    /// stream, so variants agree wherever shapes agree.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let weight = |name: &str, rows: usize, cols: usize| {
            let mut rng = stream(seed, &format!("init/{name}"));
            uniform_tensor::<T>(rows, cols, 1.0 / (rows.max(1) as f64).sqrt(), &mut rng)
        };
        let zeros = |n: usize| Tensor::<T>::zeros(&[n]);
        let sage = |name: &str, d_in: usize, d_out: usize| SageParams {
            w_self: weight(&format!("{name}.w_self"), d_in, d_out),
            w_neigh: weight(&format!("{name}.w_neigh"), d_in, d_out),
            bias: zeros(d_out),
        };
        let lstm = |name: &str, d_in: usize, h: usize| LstmParams {
            w_ih: weight(&format!("bilstm.{name}.w_ih"), d_in, 4 * h),
            w_hh: weight(&format!("bilstm.{name}.w_hh"), h, 4 * h),
            bias: zeros(4 * h),
        };
        let gnn = config.use_gnn;
        ModelParams {
            projection: config.use_projection.then(|| Tensor::identity(config.d_bert)),
            sage1: gnn.then(|| sage("sage1", config.gnn_input_dim(), config.gnn_hidden)),
            sage2: gnn.then(|| sage("sage2", config.gnn_hidden, config.d_gnn)),
            bilstm: (gnn && config.use_bilstm).then(|| BiLstmParams {
                forward: lstm("forward", config.d_gnn, config.bilstm_hidden()),
                backward: lstm("backward", config.d_gnn, config.bilstm_hidden()),
            }),
            head: HeadParams {
                w: weight("head.w", config.head_input_dim(), config.num_classes),
                b: zeros(config.num_classes),
            },
        }
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        self.map(|_, t| t.cast())
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        self.visit(|_, t| out.push(t));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let ModelParams {
            projection,
            sage1,
            sage2,
            bilstm,
            head,
        } = self;
        let mut out: Vec<&mut Tensor<T>> = Vec::new();
        out.extend(projection.as_mut());
        for s in [sage1, sage2].into_iter().flatten() {
            out.extend([&mut s.w_self, &mut s.w_neigh, &mut s.bias]);
        }
        if let Some(b) = bilstm {
            for l in [&mut b.forward, &mut b.backward] {
                out.extend([&mut l.w_ih, &mut l.w_hh, &mut l.bias]);
            }
        }
        out.extend([&mut head.w, &mut head.b]);
        out
    }

    /// Same structure with tensors taken in `visit` order from `values`.
    pub fn replaced(&self, values: &[Tensor<T>]) -> Params<T> {
        assert_eq!(values.len(), self.len(), "one value per parameter");
        let mut it = values.iter();
        self.map(|_, _| it.next().expect("length checked").clone())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ablation;

    #[test]
    fn shapes_for_default_config() {
        let c = ModelConfig::default();
        let p = Params::<f32>::init(&c, 1);
        let s1 = p.sage1.as_ref().unwrap();
        assert_eq!(s1.w_self.shape(), &[819, 1024]);
        assert_eq!(p.sage2.as_ref().unwrap().w_neigh.shape(), &[1024, 512]);
        let l = &p.bilstm.as_ref().unwrap().forward;
        assert_eq!(l.w_ih.shape(), &[512, 1024]);
        assert_eq!(l.w_hh.shape(), &[256, 1024]);
        assert_eq!(p.head.w.shape(), &[1331, 5]);
        assert!(p.projection.is_none());
        assert_eq!(p.len(), 14);
    }

    #[test]
    fn init_bounds_and_zero_biases() {
        let c = ModelConfig::default();
        let p = Params::<f64>::init(&c, 7);
        let bound = 1.0 / (1331f64).sqrt();
        assert!(p.head.w.data().iter().all(|v| v.abs() <= bound));
        assert!(p.head.b.data().iter().all(|&v| v == 0.0));
        assert!(p.sage1.as_ref().unwrap().bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn variants_share_initialization_where_shapes_agree() {
        let c = ModelConfig::default();
        let a = Params::<f32>::init(&c.clone().with_ablation(Ablation::Proposed), 916);
        let b = Params::<f32>::init(&c.with_ablation(Ablation::NodeBilstm), 916);
        assert_eq!(a.sage2, b.sage2);
        assert_eq!(a.bilstm, b.bilstm);
        assert_ne!(a.sage1.unwrap().w_self.shape(), b.sage1.unwrap().w_self.shape());
    }

    #[test]
    fn projection_starts_as_identity() {
        let c = ModelConfig {
            use_projection: true,
            d_bert: 4,
            ..ModelConfig::default()
        };
        let p = Params::<f32>::init(&c, 0);
        assert_eq!(p.projection.unwrap(), Tensor::identity(4));
    }

    #[test]
    fn names_and_mutable_views_agree() {
        let mut p = Params::<f32>::init(&ModelConfig::default(), 3);
        let names = p.names();
        assert_eq!(names[0], "sage1.w_self");
        assert_eq!(names.last().unwrap(), "head.b");
        let n = p.tensors_mut().len();
        assert_eq!(n, names.len());
        for t in p.tensors_mut() {
            t.fill(0.0);
        }
        assert!(p.tensors().iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    }
}
