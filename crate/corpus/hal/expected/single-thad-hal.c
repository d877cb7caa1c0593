/*@ ghost int state_d3 = 0; */

int open(const char *path, int oflag, ...) {
    int ret = hal_open(path, oflag);

    /*@ ghost state_d3 = 1; */
    return ret;
}

int ioctl(int fd, int request, ...) {
    if (request == MSG) {
        /*@ assert (state_d3 == 1); */
    }

    return hal_ioctl(fd, request);
}
