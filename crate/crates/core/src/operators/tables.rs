//! Reference coarse-level kernels as printed in the literature, numerators only.
//!
//! Row `q` of each table is offset `dy = q - 3`, column `p` is `dx = p - 3`.
//! The Laplace tables are relative to `1/h_l^2` with denominator
//! `4096 * 1024^(l-2)`. The mass tables carry denominator
//! `4096^2 * 1024^(l-3)` and sum to `4^(l-1)`, a factor `4^(l-1)` above the
//! unit-sum mass kernels used by the solver.

pub type Table = [[i128; 7]; 7];

pub const LAP3: Table = [
    [-3, -534, -5773, -11956, -5773, -534, -3],
    [-534, -32844, -207370, -354088, -207370, -32844, -534],
    [-5773, -207370, -294371, 384244, -294371, -207370, -5773],
    [-11956, -354088, 384244, 2945488, 384244, -354088, -11956],
    [-5773, -207370, -294371, 384244, -294371, -207370, -5773],
    [-534, -32844, -207370, -354088, -207370, -32844, -534],
    [-3, -534, -5773, -11956, -5773, -534, -3],
];

pub const MASS3: Table = [
    [1, 322, 3823, 8092, 3823, 322, 1],
    [322, 103684, 1231006, 2605624, 1231006, 103684, 322],
    [3823, 1231006, 14615329, 30935716, 14615329, 1231006, 3823],
    [8092, 2605624, 30935716, 65480464, 30935716, 2605624, 8092],
    [3823, 1231006, 14615329, 30935716, 14615329, 1231006, 3823],
    [322, 103684, 1231006, 2605624, 1231006, 103684, 322],
    [1, 322, 3823, 8092, 3823, 322, 1],
];

pub const LAP4: Table = [
    [-10395, -887166, -7871637, -15491748, -7871637, -887166, -10395],
    [-887166, -39105612, -215169378, -348459432, -215169378, -39105612, -887166],
    [-7871637, -215169378, -265120059, 413761124, -265120059, -215169378, -7871637],
    [-15491748, -348459432, 413761124, 2809129936, 413761124, -348459432, -15491748],
    [-7871637, -215169378, -265120059, 413761124, -265120059, -215169378, -7871637],
    [-887166, -39105612, -215169378, -348459432, -215169378, -39105612, -887166],
    [-10395, -887166, -7871637, -15491748, -7871637, -887166, -10395],
];

pub const MASS4: Table = [
    [27225, 3939210, 40768695, 83544780, 40768695, 3939210, 27225],
    [3939210, 569967876, 5898859542, 12088170168, 5898859542, 569967876, 3939210],
    [40768695, 5898859542, 61050008889, 125106029556, 61050008889, 5898859542, 40768695],
    [83544780, 12088170168, 125106029556, 256372094224, 125106029556, 12088170168, 83544780],
    [40768695, 5898859542, 61050008889, 125106029556, 61050008889, 5898859542, 40768695],
    [3939210, 569967876, 5898859542, 12088170168, 5898859542, 569967876, 3939210],
    [27225, 3939210, 40768695, 83544780, 40768695, 3939210, 27225],
];

pub const LAP5: Table = [
    [-13491387, -1011388446, -8590720245, -16705596516, -8590720245, -1011388446, -13491387],
    [-1011388446, -41427399756, -220811304386, -353095695272, -220811304386, -41427399756, -1011388446],
    [-8590720245, -220811304386, -262703195227, 427978620452, -262703195227, -220811304386, -8590720245],
    [-16705596516, -353095695272, 427978620452, 2827174335440, 427978620452, -353095695272, -16705596516],
    [-8590720245, -220811304386, -262703195227, 427978620452, -262703195227, -220811304386, -8590720245],
    [-1011388446, -41427399756, -220811304386, -353095695272, -220811304386, -41427399756, -1011388446],
    [-13491387, -1011388446, -8590720245, -16705596516, -8590720245, -1011388446, -13491387],
];

pub const MASS5: Table = [
    [158684409, 19907719338, 199630340247, 405976871820, 199630340247, 19907719338, 158684409],
    [19907719338, 2497518765316, 25044582577654, 50931743533240, 25044582577654, 2497518765316, 19907719338],
    [199630340247, 25044582577654, 251141703197401, 510732601675060, 251141703197401, 25044582577654, 199630340247],
    [405976871820, 50931743533240, 510732601675060, 1038647851363600, 510732601675060, 50931743533240, 405976871820],
    [199630340247, 25044582577654, 251141703197401, 510732601675060, 251141703197401, 25044582577654, 199630340247],
    [19907719338, 2497518765316, 25044582577654, 50931743533240, 25044582577654, 2497518765316, 19907719338],
    [158684409, 19907719338, 199630340247, 405976871820, 199630340247, 19907719338, 158684409],
];

pub const LAP6: Table = [
    [-14618265915, -1063059274398, -8934400311925, -17322732417892, -8934400311925, -1063059274398, -14618265915],
    [-1063059274398, -42774103061580, -226217899925314, -360608941958056, -226217899925314, -42774103061580, -1063059274398],
    [-8934400311925, -226217899925314, -266795319274715, 439293870677284, -266795319274715, -226217899925314, -8934400311925],
    [-17322732417892, -360608941958056, 439293870677284, 2882610253296592, 439293870677284, -360608941958056, -17322732417892],
    [-8934400311925, -226217899925314, -266795319274715, 439293870677284, -266795319274715, -226217899925314, -8934400311925],
    [-1063059274398, -42774103061580, -226217899925314, -360608941958056, -226217899925314, -42774103061580, -1063059274398],
    [-14618265915, -1063059274398, -8934400311925, -17322732417892, -8934400311925, -1063059274398, -14618265915],
];

pub const MASS6: Table = [
    [706549519225, 85722084590890, 852977249303575, 1731387418334860, 852977249303575, 85722084590890, 706549519225],
    [85722084590890, 10400227566028036, 103487421517331808, 210060490730926272, 103487421517331824, 10400227566028036, 85722084590890],
    [852977249303575, 103487421517331840, 1029751161146567936, 2090206046973178368, 1029751161146568192, 103487421517331792, 852977249303575],
    [1731387418334860, 210060490730926208, 2090206046973178624, 4242735025361522688, 2090206046973178624, 210060490730926208, 1731387418334860],
    [852977249303575, 103487421517331840, 1029751161146568064, 2090206046973178624, 1029751161146567936, 103487421517331792, 852977249303575],
    [85722084590890, 10400227566028036, 103487421517331808, 210060490730926208, 103487421517331808, 10400227566028036, 85722084590890],
    [706549519225, 85722084590890, 852977249303575, 1731387418334860, 852977249303575, 85722084590890, 706549519225],
];

/// Printed `(laplace, mass)` tables for levels 3 to 6 with their denominator exponents.
pub const PRINTED: [(usize, &Table, u32, &Table, u32); 4] = [
    (3, &LAP3, 22, &MASS3, 24),
    (4, &LAP4, 32, &MASS4, 34),
    (5, &LAP5, 42, &MASS5, 44),
    (6, &LAP6, 52, &MASS6, 54),
];
