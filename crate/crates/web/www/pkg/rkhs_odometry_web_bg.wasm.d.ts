/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const cutoff: (a: number, b: number) => [number, number, number, number];
export const demo_aligned: (a: number) => [number, number];
export const demo_converged: (a: number) => number;
export const demo_ellTrace: (a: number) => [number, number];
export const demo_finalEll: (a: number) => number;
export const demo_iterations: (a: number) => number;
export const demo_objectiveTrace: (a: number) => [number, number];
export const demo_rotationErrorDeg: (a: number) => number;
export const demo_source: (a: number) => [number, number];
export const demo_target: (a: number) => [number, number];
export const demo_translationError: (a: number) => number;
export const expansionCurve: (a: number, b: number, c: number) => [number, number];
export const kernelProfile: (a: number, b: number, c: number) => [number, number];
export const registerDemo: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const supportRadius: (a: number, b: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
