//! Butcher tableaux of the explicit methods.

use crate::error::{Error, Result};

/// Coefficients of an explicit (optionally embedded) Runge–Kutta method.
///
/// `error` holds `b - b̂` for the embedded estimate. The 8(5,3) pair carries a
/// second, third-order estimate in `error3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    name: &'static str,
    stages: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    error: Option<Vec<f64>>,
    error3: Option<Vec<f64>>,
    order: usize,
    embedded_order: Option<usize>,
    fsal: bool,
}

impl ButcherTableau {
    /// Builds a tableau from the rows of its strictly lower-triangular `a`
    /// (row `i` has `i` entries).
    fn explicit(name: &'static str, rows: &[&[f64]], b: &[f64], c: &[f64], order: usize) -> Self {
        let s = b.len();
        assert_eq!(rows.len(), s);
        let mut a = vec![0.0; s * s];
        for (i, row) in rows.iter().enumerate() {
            assert!(row.len() <= i, "tableau {name} is not explicit");
            a[i * s..i * s + row.len()].copy_from_slice(row);
        }
        Self {
            name,
            stages: s,
            a,
            b: b.to_vec(),
            c: c.to_vec(),
            error: None,
            error3: None,
            order,
            embedded_order: None,
            fsal: false,
        }
    }

    pub fn euler() -> Self {
        Self::explicit("euler", &[&[]], &[1.0], &[0.0], 1)
    }

    pub fn midpoint() -> Self {
        Self::explicit("midpoint", &[&[], &[0.5]], &[0.0, 1.0], &[0.0, 0.5], 2)
    }

    pub fn heun() -> Self {
        Self::explicit("heun", &[&[], &[1.0]], &[0.5, 0.5], &[0.0, 1.0], 2)
    }

    /// Kutta's third-order method.
    pub fn kutta3() -> Self {
        Self::explicit("kutta3", &[&[], &[0.5], &[-1.0, 2.0]], &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], &[0.0, 0.5, 1.0], 3)
    }

    /// The classical fourth-order method.
    pub fn rk4() -> Self {
        Self::explicit(
            "rk4",
            &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]],
            &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            &[0.0, 0.5, 0.5, 1.0],
            4,
        )
    }

    /// Dormand–Prince 5(4), first same as last.
    pub fn dopri5() -> Self {
        let b = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
        let bhat =
            [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];
        let mut t = Self::explicit(
            "dopri5",
            &[
                &[],
                &[1.0 / 5.0],
                &[3.0 / 40.0, 9.0 / 40.0],
                &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
                &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
                &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
                &b[..6],
            ],
            &b,
            &[0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0],
            5,
        );
        t.error = Some(b.iter().zip(&bhat).map(|(x, y)| x - y).collect());
        t.embedded_order = Some(4);
        t.fsal = true;
        t
    }

    /// Dormand–Prince 8(5,3) with its fifth- and third-order error estimates.
    #[allow(clippy::excessive_precision)]
    pub fn dop853() -> Self {
        let b = [
            5.42937341165687622380535766363e-2,
            0.0,
            0.0,
            0.0,
            0.0,
            4.45031289275240888144113950566,
            1.89151789931450038304281599044,
            -5.8012039600105847814672114227,
            3.1116436695781989440891606237e-1,
            -1.52160949662516078556178806805e-1,
            2.01365400804030348374776537501e-1,
            4.47106157277725905176885569043e-2,
        ];
        let e5 = vec![
            0.1312004499419488073250102996e-1,
            0.0,
            0.0,
            0.0,
            0.0,
            -0.1225156446376204440720569753e1,
            -0.4957589496572501915214079952,
            0.1664377182454986536961530415e1,
            -0.3503288487499736816886487290,
            0.3341791187130174790297318841,
            0.8192320648511571246570742613e-1,
            -0.2235530786388629525884427845e-1,
        ];
        let mut e3 = b.to_vec();
        e3[0] -= 0.244094488188976377952755905512;
        e3[8] -= 0.733846688281611857341361741547;
        e3[11] -= 0.220588235294117647058823529412e-1;
        let c = [
            0.0,
            5.26001519587677318785587544488e-2,
            7.89002279381515978178381316732e-2,
            0.118350341907227396726757197510,
            0.281649658092772603273242802490,
            1.0 / 3.0,
            0.25,
            4.0 / 13.0,
            127.0 / 195.0,
            0.6,
            6.0 / 7.0,
            1.0,
        ];
        let rows: [&[f64]; 12] = [
            &[],
            &[5.26001519587677318785587544488e-2],
            &[1.97250569845378994544595329183e-2, 5.91751709536136983633785987549e-2],
            &[2.95875854768068491816892993775e-2, 0.0, 8.87627564304205475450678981324e-2],
            &[
                2.41365134159266685502369798665e-1,
                0.0,
                -8.84549479328286085344864962717e-1,
                9.24834003261792003115737966543e-1,
            ],
            &[
                3.7037037037037037037037037037e-2,
                0.0,
                0.0,
                1.70828608729473871279604482173e-1,
                1.25467687566822425016691814123e-1,
            ],
            &[
                3.7109375e-2,
                0.0,
                0.0,
                1.70252211019544039314978060272e-1,
                6.02165389804559606850219397283e-2,
                -1.7578125e-2,
            ],
            &[
                3.70920001185047927108779319836e-2,
                0.0,
                0.0,
                1.70383925712239993810214054705e-1,
                1.07262030446373284651809199168e-1,
                -1.53194377486244017527936158236e-2,
                8.27378916381402288758473766002e-3,
            ],
            &[
                6.24110958716075717114429577812e-1,
                0.0,
                0.0,
                -3.36089262944694129406857109825,
                -8.68219346841726006818189891453e-1,
                2.75920996994467083049415600797e1,
                2.01540675504778934086186788979e1,
                -4.34898841810699588477366255144e1,
            ],
            &[
                4.77662536438264365890433908527e-1,
                0.0,
                0.0,
                -2.48811461997166764192642586468,
                -5.90290826836842996371446475743e-1,
                2.12300514481811942347288949897e1,
                1.52792336328824235832596922938e1,
                -3.32882109689848629194453265587e1,
                -2.03312017085086261358222928593e-2,
            ],
            &[
                -9.3714243008598732571704021658e-1,
                0.0,
                0.0,
                5.18637242884406370830023853209,
                1.09143734899672957818500254654,
                -8.14978701074692612513997267357,
                -1.85200656599969598641566180701e1,
                2.27394870993505042818970056734e1,
                2.49360555267965238987089396762,
                -3.0467644718982195003823669022,
            ],
            &[
                2.27331014751653820792359768449,
                0.0,
                0.0,
                -1.05344954667372501984066689879e1,
                -2.00087205822486249909675718444,
                -1.79589318631187989172765950534e1,
                2.79488845294199600508499808837e1,
                -2.85899827713502369474065508674,
                -8.87285693353062954433549289258,
                1.23605671757943030647266201528e1,
                6.43392746015763530355970484046e-1,
            ],
        ];
        let mut t = Self::explicit("dop853", &rows, &b, &c, 8);
        t.error = Some(e5);
        t.error3 = Some(e3);
        // the stabilized 5/3 estimate behaves like a seventh-order one
        t.embedded_order = Some(7);
        t
    }

    /// An explicit method of the requested order (1 to 4).
    pub fn explicit_of_order(order: usize) -> Result<Self> {
        match order {
            1 => Ok(Self::euler()),
            2 => Ok(Self::midpoint()),
            3 => Ok(Self::kutta3()),
            4 => Ok(Self::rk4()),
            _ => Err(Error::InvalidArgument(format!("no explicit method of order {order}"))),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "euler" => Ok(Self::euler()),
            "midpoint" => Ok(Self::midpoint()),
            "heun" => Ok(Self::heun()),
            "kutta3" => Ok(Self::kutta3()),
            "rk4" => Ok(Self::rk4()),
            "dopri5" | "rk45" => Ok(Self::dopri5()),
            "dop853" => Ok(Self::dop853()),
            _ => Err(Error::InvalidArgument(format!("unknown tableau `{name}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages + j]
    }

    #[inline]
    pub fn b(&self, j: usize) -> f64 {
        self.b[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.b
    }

    pub fn nodes(&self) -> &[f64] {
        &self.c
    }

    pub fn error_weights(&self) -> Option<&[f64]> {
        self.error.as_deref()
    }

    pub fn error3_weights(&self) -> Option<&[f64]> {
        self.error3.as_deref()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Order used for the step-size exponent `1/(p̂+1)`.
    pub fn embedded_order(&self) -> Option<usize> {
        self.embedded_order
    }

    pub fn is_embedded(&self) -> bool {
        self.error.is_some()
    }

    /// Last stage is evaluated at the step's result, so it doubles as the
    /// first stage of the next step.
    pub fn is_fsal(&self) -> bool {
        self.fsal
    }

    /// Largest violation of `Σ_j a_ij = c_i` and `Σ b = 1`.
    pub fn consistency_defect(&self) -> f64 {
        let s = self.stages;
        let mut worst = (self.b.iter().sum::<f64>() - 1.0).abs();
        for i in 0..s {
            let row: f64 = (0..s).map(|j| self.a(i, j)).sum();
            worst = worst.max((row - self.c[i]).abs());
        }
        worst
    }

    pub fn is_explicit(&self) -> bool {
        let s = self.stages;
        (0..s).all(|i| (i..s).all(|j| self.a(i, j) == 0.0))
    }
}
