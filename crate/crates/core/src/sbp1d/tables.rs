//! Exact boundary-closure remainders of the variable-coefficient second derivative.
//!
//! Entry `[k][i][j]` is the 6x6 block `P^(k)` (nodes 0..5) attached to the
//! coefficient sample at node `k`. Each block is symmetric, positive
//! semi-definite, and annihilates the quadratic polynomials.

#[rustfmt::skip]
pub(crate) const CLOSURE_REMAINDER: [[[(i128, i128); 6]; 6]; 4] = [
    [
        [(16014468224070686285389, 432595181411870291505600), (-1856770759303135781789, 12977855442356108745168), (9350282989563589673939, 43259518141187029150560), (-261086952629821, 1629820414891760), (1837123069993, 31060368480960), (-69283243195679917, 7660348162131149800)],
        [(-1856770759303135781789, 12977855442356108745168), (7863768359822109487843, 13904845116810116512680), (-8114181529967031548327, 9269896744540077675120), (3243916457582821, 4889461244675280), (-577090757981, 2329527636072), (113785543342010741, 3064139264852459920)],
        [(9350282989563589673939, 43259518141187029150560), (-8114181529967031548327, 9269896744540077675120), (15081479898411541045673, 10814879535296757287640), (-356285166423227, 325964082978352), (6570626271049, 15530184240480), (-300581822300176429, 4596208897278689880)],
        [(-261086952629821, 1629820414891760), (3243916457582821, 4889461244675280), (-356285166423227, 325964082978352), (1467314107480973, 1629820414891760), (-73, 195), (3, 47)],
        [(1837123069993, 31060368480960), (-577090757981, 2329527636072), (6570626271049, 15530184240480), (-73, 195), (16272768474647, 93181105442880), (-4, 115)],
        [(-69283243195679917, 7660348162131149800), (113785543342010741, 3064139264852459920), (-300581822300176429, 4596208897278689880), (3, 47), (-4, 115), (379665527655757957, 45962088972786898800)],
    ],
    [
        [(26060375, 13778293824), (-12579659, 4305716820), (-1167, 519520), (911, 170136), (-4517, 2594880), (-2373, 7035485)],
        [(-12579659, 4305716820), (60069203, 8611433640), (-727, 129880), (707, 170136), (-1561, 324360), (6193, 2814194)],
        [(-1167, 519520), (-727, 129880), (10583, 259760), (-9, 136), (7, 160), (-2, 191)],
        [(911, 170136), (707, 170136), (-9, 136), (20425, 170136), (-13, 153), (3, 139)],
        [(-4517, 2594880), (-1561, 324360), (7, 160), (-13, 153), (172919, 2594880), (-1, 53)],
        [(-2373, 7035485), (6193, 2814194), (-2, 191), (3, 139), (-1, 53), (82921, 14070970)],
    ],
    [
        [(8024729, 3925235650), (-15438103, 4710282780), (-39, 18620), (8583, 1559180), (-955, 519612), (-316, 931475)],
        [(-15438103, 4710282780), (22079321, 2826169668), (-67, 11172), (3641, 935508), (-1814, 389709), (829, 372590)],
        [(-39, 18620), (-67, 11172), (153, 3724), (-13, 196), (5, 114), (-1, 95)],
        [(8583, 1559180), (3641, 935508), (-13, 196), (37601, 311836), (-11, 129), (4, 185)],
        [(-955, 519612), (-1814, 389709), (5, 114), (-11, 129), (104087, 1558836), (-1, 53)],
        [(-316, 931475), (829, 372590), (-1, 95), (4, 185), (-1, 53), (10967, 1862950)],
    ],
    [
        [(57461, 1190799), (-2702483, 23815980), (20899, 396933), (11173, 276930), (-856, 32895), (-77, 43860)],
        [(-2702483, 23815980), (4831732, 17861985), (-324235, 2381598), (-3686, 46155), (21119, 394740), (4, 731)],
        [(20899, 396933), (-324235, 2381598), (41339, 396933), (-4, 181), (2, 153), (-1, 86)],
        [(11173, 276930), (-3686, 46155), (-4, 181), (19663, 138465), (-1, 10), (1, 51)],
        [(-856, 32895), (21119, 394740), (2, 153), (-1, 10), (7588, 98685), (-3, 172)],
        [(-77, 43860), (4, 731), (-1, 86), (1, 51), (-3, 172), (21, 3655)],
    ],
];
