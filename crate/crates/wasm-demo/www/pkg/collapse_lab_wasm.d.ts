/* tslint:disable */
/* eslint-disable */

/**
 * Empirical blow-up CDF of `n_paths` exact Stratonovich paths started at `u_eps`, against
 * the Brownian first-passage law. Returns the level followed by `(t, empirical, exact)`
 * triples on `points` times up to `t_max`.
 */
export function blow_up_cdf(g: number, rho0: number, u_eps: number, n_paths: number, t_max: number, points: number, seed: bigint): Float64Array;

/**
 * Interleaved `(t, u)` pairs on `points` times from 0 to `until · t*`.
 */
export function collapse_curve(g: number, rho0: number, until: number, points: number): Float64Array;

/**
 * `[t_star, t_eps]` for the given constants.
 */
export function collapse_times(g: number, rho0: number): Float64Array;

/**
 * `n_paths` sample paths of the chosen scheme, flattened as
 * `[len, t_0 … t_{len−1}, u_0 … u_{len−1}]` per path.
 */
export function sample_paths(g: number, rho0: number, scheme: string, u_eps: number, n_paths: number, horizon: number, dt: number, cap: number, seed: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly blow_up_cdf: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly collapse_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly collapse_times: (a: number, b: number) => [number, number, number, number];
    readonly sample_paths: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
