"""Opcode and error-code tables for compiled expression programs.

Expressions are compiled to a flat RPN program: parallel int32 arrays ``ops``
and ``args`` plus a float64 constant pool. Both the Cython kernel and the
pure-Python fallback execute the same programs, so the numbering here is the
single source of truth (the .pyx file mirrors it in a C enum; a test asserts
the two stay in sync).
"""

OP_CONST = 0   # push consts[args[i]]
OP_T = 1       # push the time variable
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_POW = 6
OP_NEG = 7
OP_SIN = 8
OP_COS = 9
OP_ABS = 10
OP_EXP = 11
OP_LOG = 12
OP_SQRT = 13
OP_MIN = 14
OP_MAX = 15

# ops that pop two values
BINARY_OPS = {OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW, OP_MIN, OP_MAX}
# ops that pop one value
UNARY_OPS = {OP_NEG, OP_SIN, OP_COS, OP_ABS, OP_EXP, OP_LOG, OP_SQRT}

FUNCTION_OPS = {
    "sin": (OP_SIN, 1),
    "cos": (OP_COS, 1),
    "abs": (OP_ABS, 1),
    "exp": (OP_EXP, 1),
    "log": (OP_LOG, 1),
    "sqrt": (OP_SQRT, 1),
    "min": (OP_MIN, 2),
    "max": (OP_MAX, 2),
}

# evaluation error codes shared by both backends
ERR_OK = 0
ERR_DIV_ZERO = 1
ERR_LOG_DOMAIN = 2
ERR_SQRT_DOMAIN = 3
ERR_POW_DOMAIN = 4
ERR_NONFINITE = 5
ERR_POSITIVITY = 6
ERR_BAD_PROGRAM = 7

ERR_MESSAGES = {
    ERR_DIV_ZERO: "division by zero",
    ERR_LOG_DOMAIN: "log of a non-positive value",
    ERR_SQRT_DOMAIN: "sqrt of a negative value",
    ERR_POW_DOMAIN: "power with negative base and non-integer exponent",
    ERR_NONFINITE: "non-finite result (overflow or zero raised to a negative power)",
    ERR_BAD_PROGRAM: "malformed expression program",
}

# largest evaluation stack either backend will allocate
MAX_STACK = 128
