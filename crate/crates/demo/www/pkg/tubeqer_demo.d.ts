/* tslint:disable */
/* eslint-disable */
/**
 * `|h^{-1/4} Tu|²` for `u = e^{-ikx}` on an `nx × nxi` grid over
 * `[0, 2π) × [-τ, τ]`, row-major with ξ varying slowest. `h = 1/k`.
 */
export function tu_heatmap(k: number, nx: number, nxi: number): Float64Array;
/**
 * `f(θ, φ)` on an `n × n` grid over `[0, π]²` (θ along rows), `NaN`
 * outside the admissible diamond.
 */
export function diamond_map(n: number): Float64Array;
/**
 * Smallest `|cos θ|` over `Σ ∩ S*M`; zero means `Σ` meets `S*M` orthogonally
 * somewhere.
 */
export function condition_a_margin(kind: string, delta: number): number;
/**
 * Restriction norms `‖h^{-1/2} T_Σ u‖` of the lattice mode `s·(a, b)` for
 * `s = 1, 2, …, steps`, with `h = 1/|s·(a, b)|`. Returns `[h₁, norm₁, h₂, …]`.
 */
export function restriction_sweep(a: number, b: number, kind: string, delta: number, steps: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
  readonly memory: WebAssembly.Memory;
  readonly condition_a_margin: (a: number, b: number, c: number) => [number, number, number];
  readonly diamond_map: (a: number) => [number, number];
  readonly restriction_sweep: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
  readonly tu_heatmap: (a: number, b: number, c: number) => [number, number, number, number];
  readonly __wbindgen_export_0: WebAssembly.Table;
  readonly __externref_table_dealloc: (a: number) => void;
  readonly __wbindgen_free: (a: number, b: number, c: number) => void;
  readonly __wbindgen_malloc: (a: number, b: number) => number;
  readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
  readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;
/**
* Instantiates the given `module`, which can either be bytes or
* a precompiled `WebAssembly.Module`.
*
* @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
*
* @returns {InitOutput}
*/
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
* If `module_or_path` is {RequestInfo} or {URL}, makes a request and
* for everything else, calls `WebAssembly.instantiate` directly.
*
* @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
*
* @returns {Promise<InitOutput>}
*/
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
