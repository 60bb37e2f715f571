//! Published low-pass filter coefficients.
//!
//! Symlets are recomputed by spectral factorization at high precision; the
//! widely circulated 16-digit tables miss orthonormality by ~1e-12.
//!
//! Orthogonal families store only the reconstruction scaling filter; the
//! analysis low-pass is its reverse. Biorthogonal families store both
//! low-pass filters zero-padded to a common length.

pub(super) const DB2_SCALING: [f64; 4] =
    [0.48296291314453416, 0.8365163037378079, 0.2241438680420134, -0.12940952255126037];

pub(super) const DB3_SCALING: [f64; 6] = [
    0.33267055295008263,
    0.8068915093110925,
    0.45987750211849154,
    -0.13501102001025458,
    -0.08544127388202666,
    0.03522629188570953,
];

pub(super) const DB5_SCALING: [f64; 10] = [
    0.16010239797419293,
    0.6038292697971896,
    0.7243085284377729,
    0.13842814590132074,
    -0.24229488706638203,
    -0.032244869584638375,
    0.07757149384004572,
    -0.006241490212798274,
    -0.012580751999081999,
    0.0033357252854737712,
];

pub(super) const SYM2_SCALING: [f64; 4] =
    [0.48296291314453416, 0.8365163037378079, 0.2241438680420134, -0.12940952255126037];

pub(super) const SYM3_SCALING: [f64; 6] = [
    0.33267055295008263,
    0.8068915093110925,
    0.45987750211849154,
    -0.13501102001025458,
    -0.08544127388202666,
    0.03522629188570953,
];

pub(super) const SYM4_SCALING: [f64; 8] = [
    0.032223100604051466,
    -0.012603967262031304,
    -0.09921954357663353,
    0.29785779560530606,
    0.8037387518051321,
    0.497618667632775,
    -0.029635527646002493,
    -0.07576571478950221,
];

pub(super) const SYM5_SCALING: [f64; 10] = [
    0.019538882735249827,
    -0.021101834024689042,
    -0.17532808990805623,
    0.01660210576451085,
    0.633978963456792,
    0.7234076904040407,
    0.19939753397685558,
    -0.039134249302313844,
    0.02951949092570626,
    0.027333068344998768,
];

pub(super) const COIF4_SCALING: [f64; 24] = [
    0.000892313902537003,
    -0.001629492425226786,
    -0.007346167936268051,
    0.01606894713157503,
    0.02668230466960483,
    -0.08126671024919373,
    -0.05607731960356926,
    0.41530842700068227,
    0.7822389344242826,
    0.43438603311435653,
    -0.06662747236681717,
    -0.09622042453595264,
    0.03933442260558915,
    0.02508225333794961,
    -0.015211728187697211,
    -0.0056582838001308835,
    0.0037514346971460866,
    0.0012665610789256603,
    -0.0005890202246332165,
    -0.0002599743371222568,
    6.233885431278719e-05,
    3.1229861599195265e-05,
    -3.259647940030751e-06,
    -1.7849909144933469e-06,
];

pub(super) const COIF5_SCALING: [f64; 30] = [
    -0.000212081862067494,
    0.0003585777411617577,
    0.0021782943778456947,
    -0.00415931262757864,
    -0.010131584846900276,
    0.023408322118927783,
    0.028169744270532353,
    -0.09192158806008609,
    -0.052046670253554764,
    0.42157126673075435,
    0.7742936228603274,
    0.4379823066591634,
    -0.06203775157498196,
    -0.10556315130733723,
    0.041287530472117834,
    0.032674799467057355,
    -0.019758391600965465,
    -0.009159507338676163,
    0.006761520220620417,
    0.0024315754425382886,
    -0.0016616273039298788,
    -0.0006375589261258812,
    0.0003018579416682448,
    0.00014035632812373243,
    -4.12198619242655e-05,
    -2.1270221672515614e-05,
    3.7007277113394796e-06,
    2.0612203985788783e-06,
    -1.6237995172048338e-07,
    -9.604010112767894e-08,
];

pub(super) const BIOR3_1_DEC_LO: [f64; 4] =
    [-0.3535533905932738, 1.0606601717798212, 1.0606601717798212, -0.3535533905932738];

pub(super) const BIOR3_1_REC_LO: [f64; 4] =
    [0.1767766952966369, 0.5303300858899106, 0.5303300858899106, 0.1767766952966369];

pub(super) const BIOR3_5_DEC_LO: [f64; 12] = [
    -0.013810679320049757,
    0.04143203796014927,
    0.052480581416189075,
    -0.26792717880896527,
    -0.07181553246425873,
    0.966747552403483,
    0.966747552403483,
    -0.07181553246425873,
    -0.26792717880896527,
    0.052480581416189075,
    0.04143203796014927,
    -0.013810679320049757,
];

pub(super) const BIOR3_5_REC_LO: [f64; 12] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.1767766952966369,
    0.5303300858899106,
    0.5303300858899106,
    0.1767766952966369,
    0.0,
    0.0,
    0.0,
    0.0,
];
