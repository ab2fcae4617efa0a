/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Occupancy of the hull carved from the first `views` schedule poses, on
     * the horizontal slice nearest to height `z` in [-1, 1]. One pixel per
     * voxel, +x to the right and +y up.
     */
    hull_slice(views: number, grid_resolution: number, z: number): Uint8Array;
    /**
     * Silhouette of the hull from the first `views` poses, seen from any pose.
     */
    hull_view(views: number, grid_resolution: number, polar_deg: number, azimuth_deg: number): Uint8Array;
    /**
     * Hull (grey), warped foreground (green) and outpainting region (red) for
     * schedule pose `index`, with every earlier pose counted as seen.
     */
    masks(index: number, grid_resolution: number, upscale: number): MaskView;
    /**
     * `scene_json` may be empty for the default sphere of radius 0.5.
     */
    constructor(scene_json: string, size: number);
    /**
     * Shaded render of the scene.
     */
    render(polar_deg: number, azimuth_deg: number): Uint8Array;
    schedule_len(): number;
    /**
     * `[polar, azimuth]` of schedule entry `index`.
     */
    schedule_pose(index: number): Float64Array;
    size(): number;
}

/**
 * Pixel counts of the three masks.
 */
export class MaskStats {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    foreground: number;
    hull: number;
    outpaint: number;
}

export class MaskView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    rgba(): Uint8Array;
    stats(): MaskStats;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly __wbg_get_maskstats_foreground: (a: number) => number;
    readonly __wbg_get_maskstats_hull: (a: number) => number;
    readonly __wbg_get_maskstats_outpaint: (a: number) => number;
    readonly __wbg_maskstats_free: (a: number, b: number) => void;
    readonly __wbg_maskview_free: (a: number, b: number) => void;
    readonly __wbg_set_maskstats_foreground: (a: number, b: number) => void;
    readonly __wbg_set_maskstats_hull: (a: number, b: number) => void;
    readonly __wbg_set_maskstats_outpaint: (a: number, b: number) => void;
    readonly demo_hull_slice: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_hull_view: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_masks: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly demo_new: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_render: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_schedule_len: (a: number) => number;
    readonly demo_schedule_pose: (a: number, b: number) => [number, number];
    readonly demo_size: (a: number) => number;
    readonly maskview_rgba: (a: number) => [number, number];
    readonly maskview_stats: (a: number) => number;
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
