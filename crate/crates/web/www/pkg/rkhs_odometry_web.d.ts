/* tslint:disable */
/* eslint-disable */

/**
 * Outcome of one demo registration.
 */
export class Demo {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Moved cloud after alignment, flattened xyz.
     */
    aligned(): Float64Array;
    /**
     * Length-scale per iteration.
     */
    ellTrace(): Float64Array;
    /**
     * Objective per iteration.
     */
    objectiveTrace(): Float64Array;
    /**
     * Reference cloud, flattened xyz.
     */
    source(): Float64Array;
    /**
     * Moved cloud before alignment, flattened xyz.
     */
    target(): Float64Array;
    readonly converged: boolean;
    readonly finalEll: number;
    readonly iterations: number;
    readonly rotationErrorDeg: number;
    readonly translationError: number;
}

/**
 * `[s_cut, k_cut]` for an expansion order and tolerance.
 */
export function cutoff(order: number, tolerance: number): Float64Array;

/**
 * Interleaved `[s, g(s), expansion(s)]` for `samples` points on `(0, s_max]`.
 */
export function expansionCurve(order: number, s_max: number, samples: number): Float64Array;

/**
 * Interleaved `[r, k(r)]` of the unit-variance spatial kernel out to twice
 * the support radius, with `k = 0` where pairs are dropped.
 */
export function kernelProfile(ell: number, tau: number, samples: number): Float64Array;

/**
 * Moves the scene by a rotation of `angle_deg` about a fixed oblique axis
 * and a translation of `translation_cm`, adds uniform noise of `noise_mm`,
 * and registers it back.
 */
export function registerDemo(angle_deg: number, translation_cm: number, noise_mm: number, adaptive: boolean, ell_init: number, seed: number): Demo;

/**
 * Support radius of the spatial kernel, meters.
 */
export function supportRadius(ell: number, tau: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly cutoff: (a: number, b: number) => [number, number, number, number];
    readonly demo_aligned: (a: number) => [number, number];
    readonly demo_converged: (a: number) => number;
    readonly demo_ellTrace: (a: number) => [number, number];
    readonly demo_finalEll: (a: number) => number;
    readonly demo_iterations: (a: number) => number;
    readonly demo_objectiveTrace: (a: number) => [number, number];
    readonly demo_rotationErrorDeg: (a: number) => number;
    readonly demo_source: (a: number) => [number, number];
    readonly demo_target: (a: number) => [number, number];
    readonly demo_translationError: (a: number) => number;
    readonly expansionCurve: (a: number, b: number, c: number) => [number, number];
    readonly kernelProfile: (a: number, b: number, c: number) => [number, number];
    readonly registerDemo: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly supportRadius: (a: number, b: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
