/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const __wbg_get_maskstats_foreground: (a: number) => number;
export const __wbg_get_maskstats_hull: (a: number) => number;
export const __wbg_get_maskstats_outpaint: (a: number) => number;
export const __wbg_maskstats_free: (a: number, b: number) => void;
export const __wbg_maskview_free: (a: number, b: number) => void;
export const __wbg_set_maskstats_foreground: (a: number, b: number) => void;
export const __wbg_set_maskstats_hull: (a: number, b: number) => void;
export const __wbg_set_maskstats_outpaint: (a: number, b: number) => void;
export const demo_hull_slice: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_hull_view: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const demo_masks: (a: number, b: number, c: number, d: number) => [number, number, number];
export const demo_new: (a: number, b: number, c: number) => [number, number, number];
export const demo_render: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_schedule_len: (a: number) => number;
export const demo_schedule_pose: (a: number, b: number) => [number, number];
export const demo_size: (a: number) => number;
export const maskview_rgba: (a: number) => [number, number];
export const maskview_stats: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
